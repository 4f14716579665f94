// Command-line front end: fit, predict, cv, rank, stability, transform,
// cluster, dwt, dtw. Exit codes: 0 success, 1 usage, 2 data error,
// 3 numerical failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mlcore/dtw.hpp"
#include "mlcore/wavelet.hpp"
#include "mlcore/workflow.hpp"

using namespace mlcore;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numerical = 3;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotConverged:
    case ErrorKind::SingularCovariance: return exit_numerical;
    case ErrorKind::InvalidParameter:
    case ErrorKind::UnsupportedKernel:
    case ErrorKind::InvalidFoldCount:
    case ErrorKind::InvalidSplit:
    case ErrorKind::InvalidWindow: return exit_usage;
    default: return exit_data;
  }
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string output;
};

struct DataOptions {
  std::string path;
  bool header = false;
  std::string delimiter = ",";
  std::string label_column = "last";

  void add_to(CLI::App* app, bool required = true) {
    auto* o = app->add_option("--data,-d", path, "input CSV file");
    if (required) o->required();
    app->add_flag("--header", header, "first line is a header");
    app->add_option("--delimiter", delimiter, "field separator, one character or 'tab'")->capture_default_str();
    app->add_option("--label-column", label_column, "label column index, 'last' or 'none'")->capture_default_str();
  }

  CsvOptions csv() const {
    CsvOptions o;
    o.header = header;
    if (delimiter == "tab") o.delimiter = '\t';
    else if (delimiter.size() == 1) o.delimiter = delimiter[0];
    else throw InvalidParameter("--delimiter must be one character or 'tab'");
    if (label_column == "last") o.label_column = -1;
    else if (label_column == "none") o.label_column = std::nullopt;
    else {
      try {
        std::size_t used = 0;
        o.label_column = std::stol(label_column, &used);
        if (used != label_column.size()) throw std::invalid_argument(label_column);
      } catch (const std::logic_error&) {
        throw InvalidParameter("--label-column must be an integer, 'last' or 'none'");
      }
    }
    return o;
  }
};

Params parse_params(const std::vector<std::string>& kv) {
  Params p;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidParameter("parameter '" + s + "' is not key=value");
    p.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return p;
}

/// Writes to --output when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw InvalidData("cannot write '" + path + "'");
    }
  }
  std::ostream& out() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string num(double v) { return format_number(v, 17); }

void write_matrix(std::ostream& o, const RowMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) o << (j ? "," : "") << num(m(i, j));
    o << '\n';
  }
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

/// Numbers separated by commas, whitespace or newlines.
std::vector<double> read_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open '" + path + "'");
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    std::istringstream ls(line);
    std::string tok;
    std::size_t col = 0;
    while (ls >> tok) {
      ++col;
      const auto v = detail::parse_number(tok);
      if (!v) throw ParseError("non-numeric value '" + tok + "' in " + path, lineno, col);
      out.push_back(*v);
    }
  }
  if (out.empty()) throw InvalidLength("empty series in '" + path + "'");
  return out;
}

int report_exit(const WorkflowReport& rep) {
  if (!rep.failed()) return 0;
  for (const auto& r : rep.replicates)
    if (!r.ok && (r.error_kind == "NotConverged" || r.error_kind == "SingularCovariance")) return exit_numerical;
  return exit_data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlcore: machine learning workflows from the command line"};
  app.fallthrough();  // global options may also follow the subcommand
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed (overrides the config file)");
  app.add_option("--config,-c", g.config, "workflow INI file");
  app.add_option("--output,-o", g.output, "machine-readable output file (default stdout)");

  // fit
  auto* fit = app.add_subcommand("fit", "fit one estimator on a labeled CSV and save the model");
  DataOptions fit_data;
  fit_data.add_to(fit);
  std::string fit_estimator_name, fit_model;
  std::vector<std::string> fit_params;
  fit->add_option("--estimator,-e", fit_estimator_name, "catalog estimator name")->required();
  fit->add_option("--param,-p", fit_params, "hyperparameter key=value (repeatable)");
  fit->add_option("--model,-m", fit_model, "model file to write")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "predict with a saved model; one value per line");
  DataOptions pred_data;
  pred_data.label_column = "none";
  pred_data.add_to(predict);
  std::string pred_model;
  predict->add_option("--model,-m", pred_model, "model file")->required();

  // cv
  auto* cv = app.add_subcommand("cv", "run a resampled workflow (needs --config or --data/--estimator)");
  DataOptions cv_data;
  cv_data.add_to(cv, false);
  std::string cv_estimator, cv_ranking, cv_report;
  std::vector<std::string> cv_params, cv_ranking_params;
  Index cv_folds = 5, cv_repeats = 1, cv_keep = 0, cv_threads = 1;
  cv->add_option("--estimator,-e", cv_estimator, "catalog estimator name");
  cv->add_option("--param,-p", cv_params, "estimator hyperparameter key=value");
  cv->add_option("--folds", cv_folds, "k of k-fold")->capture_default_str();
  cv->add_option("--repeats", cv_repeats, "k-fold repetitions")->capture_default_str();
  cv->add_option("--rank", cv_ranking, "in-fold feature ranking method (rfe, kfda_rfe, irelief, golub)");
  cv->add_option("--rank-param", cv_ranking_params, "ranking parameter key=value");
  cv->add_option("--keep", cv_keep, "features kept after ranking (0 keeps all)");
  cv->add_option("--threads", cv_threads, "replicates run in parallel")->capture_default_str();
  cv->add_option("--report", cv_report, "human-readable report file (default stderr)");

  // rank
  auto* rank = app.add_subcommand("rank", "rank the features of a labeled CSV; one index per line, best first");
  DataOptions rank_data;
  rank_data.add_to(rank);
  std::string rank_method = "rfe";
  std::vector<std::string> rank_params;
  rank->add_option("--method", rank_method, "rfe, kfda_rfe, irelief or golub")->capture_default_str();
  rank->add_option("--param,-p", rank_params, "ranking parameter key=value");

  // stability
  auto* stability = app.add_subcommand("stability", "Canberra stability of ranked lists (one list per CSV row)");
  std::string lists_path;
  std::optional<Index> top_k, universe;
  stability->add_option("--lists,-l", lists_path, "CSV of 0-based feature indices, best first")->required();
  stability->add_option("--top-k,-k", top_k, "truncation depth (default: list length)");
  stability->add_option("--features", universe, "number of features (default: list length)");

  // transform
  auto* transform = app.add_subcommand("transform", "project samples on principal components");
  DataOptions tr_data;
  tr_data.label_column = "none";
  tr_data.add_to(transform);
  std::string tr_method = "pca";
  Index tr_components = 2;
  std::vector<std::string> tr_params;
  transform->add_option("--method", tr_method, "pca or kpca")->capture_default_str();
  transform->add_option("--components,-k", tr_components, "components kept")->capture_default_str();
  transform->add_option("--param,-p", tr_params, "kernel parameter key=value (kpca)");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means or hierarchical clustering; one cluster id per line");
  DataOptions cl_data;
  cl_data.label_column = "none";
  cl_data.add_to(cluster);
  std::string cl_method = "kmeans", cl_linkage = "average";
  Index cl_k = 2;
  cluster->add_option("--method", cl_method, "kmeans or hierarchical")->capture_default_str();
  cluster->add_option("--k", cl_k, "number of clusters")->capture_default_str();
  cluster->add_option("--linkage", cl_linkage, "single, complete, average or ward")->capture_default_str();

  // dwt
  auto* dwt_cmd = app.add_subcommand("dwt", "discrete wavelet transform of a series");
  std::string dwt_input, dwt_wavelet = "haar";
  std::size_t dwt_levels = 1;
  bool dwt_undecimated = false;
  dwt_cmd->add_option("--input,-i", dwt_input, "series file (numbers separated by commas or whitespace)")->required();
  dwt_cmd->add_option("--wavelet,-w", dwt_wavelet, "haar or d4")->capture_default_str();
  dwt_cmd->add_option("--levels,-L", dwt_levels, "decomposition levels")->capture_default_str();
  dwt_cmd->add_flag("--undecimated", dwt_undecimated, "undecimated (a trous) transform");

  // dtw
  auto* dtw_cmd = app.add_subcommand("dtw", "dynamic time warping distance and path");
  std::string dtw_x, dtw_y;
  std::optional<std::size_t> dtw_window;
  bool dtw_multichannel = false;
  dtw_cmd->add_option("--x", dtw_x, "first series")->required();
  dtw_cmd->add_option("--y", dtw_y, "second series")->required();
  dtw_cmd->add_option("--window", dtw_window, "Sakoe-Chiba band radius");
  dtw_cmd->add_flag("--multichannel", dtw_multichannel, "CSV rows are time steps, columns are channels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_usage;
  }

  try {
    Sink sink(g.output);
    auto& out = sink.out();

    if (*fit) {
      const auto d = parse_csv(fit_data.path, fit_data.csv());
      const auto model = fit_estimator({fit_estimator_name, parse_params(fit_params)}, d);
      save_model(fit_model, model);
      out << "model=" << to_string(kind_of(model)) << "\nsamples=" << d.size() << "\nfeatures=" << d.features()
          << "\npath=" << fit_model << '\n';
    } else if (*predict) {
      const auto model = load_model(pred_model);
      const auto csv = pred_data.csv();
      const auto table = read_csv_table(pred_data.path, csv);
      std::optional<LabeledDataset> labeled;
      const SampleMatrix X = csv.label_column ? (labeled = to_dataset(table, csv))->x : to_samples(table);
      const Vector yhat = predict_model(model, X);
      for (Eigen::Index i = 0; i < yhat.size(); ++i) out << num(yhat[i]) << '\n';
      if (labeled) {
        if (is_classifier(model)) {
          std::vector<Label> truth = labeled->labels(), guess;
          for (Eigen::Index i = 0; i < yhat.size(); ++i) guess.push_back(Label(yhat[i]));
          std::cerr << "error " << format_number(error_rate(truth, guess), 4) << '\n';
        } else {
          std::cerr << "mse " << format_number(mean_squared_error(labeled->y, yhat), 4) << '\n';
        }
      }
    } else if (*cv) {
      WorkflowConfig c;
      if (!g.config.empty()) {
        c = load_workflow_config(g.config);
      } else {
        if (cv_data.path.empty() || cv_estimator.empty())
          throw InvalidParameter("cv needs --config, or --data and --estimator");
        c.task = estimator_task(cv_estimator) == EstimatorTask::Classification ? WorkflowTask::Classify
                                                                               : WorkflowTask::Regress;
        c.seed = g.seed;
        c.data_path = cv_data.path;
        c.csv = cv_data.csv();
        c.estimator = {cv_estimator, parse_params(cv_params)};
        c.resampling.folds = cv_folds;
        c.resampling.repeats = cv_repeats;
        c.threads = cv_threads;
        if (!cv_ranking.empty()) c.ranking = RankingSpec{cv_ranking, parse_params(cv_ranking_params)};
        c.keep = cv_keep;
        if (!cv_report.empty()) c.report_path = cv_report;
      }
      if (g.seed) c.seed = g.seed;
      c.validate();
      const auto rep = run_workflow(c);
      const std::string text = render_text(rep), records = render_records(rep);
      const std::string report_path = cv_report.empty() ? c.report_path : cv_report;
      if (report_path.empty()) std::cerr << text;
      else Sink(report_path).out() << text;
      if (g.output.empty() && !c.records_path.empty()) Sink(c.records_path).out() << records;
      else out << records;
      if (rep.output_data && !c.data_output_path.empty()) write_matrix(Sink(c.data_output_path).out(), *rep.output_data);
      return report_exit(rep);
    } else if (*rank) {
      const auto d = parse_csv(rank_data.path, rank_data.csv());
      const auto r = rank_features({rank_method, parse_params(rank_params)}, d);
      for (Index f : r.order) out << f << '\n';
    } else if (*stability) {
      std::ifstream in(lists_path);
      if (!in) throw InvalidData("cannot open '" + lists_path + "'");
      const auto table = read_csv_table(in, CsvOptions{false, ',', std::nullopt});
      RankedListSet set;
      set.universe = universe.value_or(table.columns);
      for (const auto& row : table.rows) {
        std::vector<Index> list;
        for (double v : row) {
          if (v < 0 || v != std::floor(v)) throw InvalidLists("list entries must be non-negative integers");
          list.push_back(Index(v));
        }
        set.lists.push_back(std::move(list));
      }
      const auto s = canberra_stability(set, top_k);
      out << "indicator=" << num(s.indicator) << "\nmean_distance=" << num(s.mean_distance)
          << "\nexpected=" << num(s.expected) << "\ntop_k=" << s.top_k << "\npairs=" << s.pairs
          << "\nnormalization=" << s.normalization << '\n';
    } else if (*transform) {
      const auto csv = tr_data.csv();
      const auto table = read_csv_table(tr_data.path, csv);
      const SampleMatrix X = csv.label_column ? to_dataset(table, csv).x : to_samples(table);
      if (tr_method == "pca") {
        if (!tr_params.empty()) throw InvalidParameter("pca takes no --param");
        write_matrix(out, pca_transform(pca_learn(X), X, tr_components).values());
      } else if (tr_method == "kpca") {
        const Params p = parse_params(tr_params);
        const auto kernel = kernel_from_params(p, "gaussian");
        p.check_consumed("kpca");
        write_matrix(out, RowMatrix(kpca_transform(kpca_learn(X, kernel), X, tr_components)));
      } else {
        throw InvalidParameter("transform method must be pca or kpca");
      }
    } else if (*cluster) {
      const auto csv = cl_data.csv();
      const auto table = read_csv_table(cl_data.path, csv);
      const SampleMatrix X = csv.label_column ? to_dataset(table, csv).x : to_samples(table);
      std::vector<Index> assignment;
      if (cl_method == "kmeans") assignment = kmeans(X, cl_k, g.seed.value_or(0)).assignments;
      else if (cl_method == "hierarchical") assignment = cut(linkage(X, linkage_from_string(cl_linkage)), cl_k);
      else throw InvalidParameter("cluster method must be kmeans or hierarchical");
      for (Index a : assignment) out << a << '\n';
    } else if (*dwt_cmd) {
      const auto x = read_series(dwt_input);
      const auto w = WaveletFilter::by_name(dwt_wavelet);
      if (dwt_undecimated) {
        const auto c = udwt(x, w, dwt_levels);
        for (std::size_t l = 0; l < c.details.size(); ++l) out << "detail." << l + 1 << "=" << join(c.details[l]) << '\n';
        out << "approximation=" << join(c.approximation) << '\n';
      } else {
        const auto c = dwt(x, w, dwt_levels);
        for (std::size_t l = 0; l < c.details.size(); ++l) out << "detail." << l + 1 << "=" << join(c.details[l]) << '\n';
        out << "approximation=" << join(c.approximation) << '\n';
      }
    } else if (*dtw_cmd) {
      WarpResult r;
      if (dtw_multichannel) {
        const auto a = to_samples(read_csv_table(dtw_x, CsvOptions{false, ',', std::nullopt}));
        const auto b = to_samples(read_csv_table(dtw_y, CsvOptions{false, ',', std::nullopt}));
        r = dtw(Eigen::MatrixXd(a.values()), Eigen::MatrixXd(b.values()), dtw_window);
      } else {
        r = dtw(read_series(dtw_x), read_series(dtw_y), dtw_window);
      }
      out << "distance=" << num(r.distance) << "\npath=";
      for (std::size_t s = 0; s < r.path.size(); ++s) out << (s ? ";" : "") << r.path[s].first << "," << r.path[s].second;
      out << '\n';
    }
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "mlcore: " << e.what() << " (line " << e.line() << ")\n";
    return exit_data;
  } catch (const Error& e) {
    std::cerr << "mlcore: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "mlcore: " << e.what() << '\n';
    return exit_data;
  }
}
