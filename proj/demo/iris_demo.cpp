// Learn PCA on Iris, keep two components, train a linear SVM on the scores and
// report the training error.

#include <cstdio>
#include <string>

#include "mlcore/csv.hpp"
#include "mlcore/decomposition.hpp"
#include "mlcore/svm.hpp"

int main(int argc, char** argv) {
  using namespace mlcore;
  const std::string path = argc > 1 ? argv[1] : std::string(MLCORE_DATA_DIR) + "/iris.csv";
  CsvOptions csv;
  csv.header = true;
  const LabeledDataset iris = parse_csv(path, csv);

  const PcaModel pca = pca_learn(iris.x);
  const SampleMatrix z = pca_transform(pca, iris.x, 2);
  std::printf("explained variance of 2 PCs: %.4f\n", pca.eigenvalues.head(2).sum() / pca.eigenvalues.sum());

  const LabeledDataset projected(z, iris.y);
  SvmOptions opt;
  opt.C = 1.0;
  const SvmModel svm = svc_train(projected, KernelSpec::linear(), opt);
  const auto predicted = svm_predict(svm, z);
  const auto truth = iris.labels();
  std::printf("support vectors: %zu\n", svm.num_support());
  std::printf("training error: %.3f\n", error_rate(truth, predicted));
  return 0;
}
