#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mlcore/decomposition.hpp"
#include "mlcore/discriminant.hpp"
#include "mlcore/linear.hpp"
#include "mlcore/nonparametric.hpp"
#include "mlcore/svm.hpp"

namespace mlcore {

// Layout: "MLCM", u16 format version, u16 kind tag, then the payload. All
// integers are little-endian u64/i64 unless noted; doubles are the IEEE-754
// bit pattern as a little-endian u64; matrices are (rows, cols, row-major data).

inline constexpr char model_magic[4] = {'M', 'L', 'C', 'M'};
inline constexpr std::uint16_t model_format_version = 1;

enum class ModelKind : std::uint16_t {
  Linear = 1,
  KernelRidge = 2,
  Gaussian = 3,
  Fisher = 4,
  KernelFisher = 5,
  Srda = 6,
  Svm = 7,
  Knn = 8,
  Parzen = 9,
  Tree = 10,
  Pca = 11,
  Kpca = 12,
};

using FittedModel = std::variant<LinearModel, DualModel, GaussianClassModel, DiscriminantDirection, KfdaModel,
                                 SrdaModel, SvmModel, KnnModel, ParzenModel, TreeModel, PcaModel, KpcaModel>;

inline constexpr std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Linear: return "linear";
    case ModelKind::KernelRidge: return "kernel_ridge";
    case ModelKind::Gaussian: return "gaussian";
    case ModelKind::Fisher: return "fda";
    case ModelKind::KernelFisher: return "kfda";
    case ModelKind::Srda: return "srda";
    case ModelKind::Svm: return "svm";
    case ModelKind::Knn: return "knn";
    case ModelKind::Parzen: return "parzen";
    case ModelKind::Tree: return "tree";
    case ModelKind::Pca: return "pca";
    case ModelKind::Kpca: return "kpca";
  }
  return "unknown";
}

// Variant alternatives are declared in tag order.
inline ModelKind kind_of(const FittedModel& m) noexcept { return ModelKind(m.index() + 1); }

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  void u16(std::uint16_t v) {
    for (int b = 0; b < 2; ++b) out_.push_back(char((v >> (8 * b)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(char((v >> (8 * b)) & 0xff));
  }
  void i64(std::int64_t v) { u64(std::uint64_t(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void flag(bool v) { out_.push_back(v ? 1 : 0); }

  void labels(const std::vector<Label>& v) {
    u64(v.size());
    for (Label l : v) i64(l);
  }
  void indices(const std::vector<Index>& v) {
    u64(v.size());
    for (Index i : v) u64(i);
  }
  void vec(const Vector& v) {
    u64(std::uint64_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  template <class M>
  void mat(const M& m) {
    u64(std::uint64_t(m.rows()));
    u64(std::uint64_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void kernel(const KernelSpec& k) {
    if (k.kind == KernelKind::Custom) throw FormatError("custom kernels cannot be serialized");
    u16(std::uint16_t(k.kind));
    flag(k.gamma.has_value());
    f64(k.gamma.value_or(0.0));
    i64(k.degree);
    f64(k.coef0);
  }
  void centering(const GramCentering& c) {
    vec(c.col_means);
    f64(c.grand_mean);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : in_(bytes) {}

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  const char* raw(std::size_t n) {
    if (n > remaining()) throw FormatError("truncated model stream at byte " + std::to_string(pos_));
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint16_t u16() {
    const auto* p = reinterpret_cast<const unsigned char*>(raw(2));
    return std::uint16_t(p[0] | (p[1] << 8));
  }
  std::uint64_t u64() {
    const auto* p = reinterpret_cast<const unsigned char*>(raw(8));
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return v;
  }
  std::int64_t i64() { return std::int64_t(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool flag() {
    const char c = *raw(1);
    if (c != 0 && c != 1) throw FormatError("corrupt boolean field");
    return c == 1;
  }

  // Element count guarded against the bytes left, so corrupt lengths fail
  // before any allocation.
  std::size_t count(std::size_t element_bytes) {
    const std::uint64_t n = u64();
    if (element_bytes > 0 && n > remaining() / element_bytes)
      throw FormatError("truncated model stream: length " + std::to_string(n) + " exceeds remaining bytes");
    return std::size_t(n);
  }

  std::vector<Label> labels() {
    std::vector<Label> v(count(8));
    for (auto& l : v) l = i64();
    return v;
  }
  std::vector<Index> indices() {
    std::vector<Index> v(count(8));
    for (auto& i : v) i = Index(u64());
    return v;
  }
  Vector vec() {
    Vector v(static_cast<Eigen::Index>(count(8)));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  template <class M>
  M mat() {
    const std::uint64_t r = u64(), c = u64();
    if (c != 0 && r > remaining() / 8 / c) throw FormatError("truncated model stream: matrix exceeds remaining bytes");
    M m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    return m;
  }
  KernelSpec kernel() {
    KernelSpec k;
    const auto kind = u16();
    if (kind >= std::uint16_t(KernelKind::Custom)) throw FormatError("unknown kernel tag " + std::to_string(kind));
    k.kind = KernelKind(kind);
    const bool has_gamma = flag();
    const double g = f64();
    if (has_gamma) k.gamma = g;
    k.degree = int(i64());
    k.coef0 = f64();
    return k;
  }
  GramCentering centering() {
    GramCentering c;
    c.col_means = vec();
    c.grand_mean = f64();
    return c;
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

inline void require(bool ok, const char* what) {
  if (!ok) throw FormatError(std::string("inconsistent model payload: ") + what);
}

inline void write(ByteWriter& w, const LinearModel& m) {
  w.vec(m.weights);
  w.f64(m.intercept);
  w.labels(m.classes);
}
inline void read(ByteReader& r, LinearModel& m) {
  m.weights = r.vec();
  m.intercept = r.f64();
  m.classes = r.labels();
}

inline void write(ByteWriter& w, const DualModel& m) {
  w.vec(m.dual_coefs);
  w.f64(m.intercept);
  w.kernel(m.kernel);
  w.centering(m.centering);
  w.mat(m.training_inputs);
}
inline void read(ByteReader& r, DualModel& m) {
  m.dual_coefs = r.vec();
  m.intercept = r.f64();
  m.kernel = r.kernel();
  m.centering = r.centering();
  m.training_inputs = r.mat<RowMatrix>();
  require(m.centering.col_means.size() == m.dual_coefs.size(), "centering length");
}

inline void write(ByteWriter& w, const GaussianClassModel& m) {
  w.u16(std::uint16_t(m.kind));
  w.labels(m.classes);
  w.mat(m.means);
  w.vec(m.priors);
  w.u64(m.covariances.size());
  for (const auto& c : m.covariances) w.mat(c);
  w.f64(m.reg);
}
inline void read(ByteReader& r, GaussianClassModel& m) {
  const auto kind = r.u16();
  require(kind <= std::uint16_t(CovarianceKind::PerClassFull), "covariance kind");
  m.kind = CovarianceKind(kind);
  m.classes = r.labels();
  m.means = r.mat<Matrix>();
  m.priors = r.vec();
  m.covariances.resize(r.count(16));
  for (auto& c : m.covariances) c = r.mat<Matrix>();
  m.reg = r.f64();
  require(Index(m.means.rows()) == m.classes.size() && Index(m.priors.size()) == m.classes.size(), "class table");
}

inline void write(ByteWriter& w, const DiscriminantDirection& m) {
  w.vec(m.direction);
  w.f64(m.threshold);
  w.labels(m.classes);
}
inline void read(ByteReader& r, DiscriminantDirection& m) {
  m.direction = r.vec();
  m.threshold = r.f64();
  m.classes = r.labels();
}

inline void write(ByteWriter& w, const KfdaModel& m) {
  w.vec(m.dual_coefs);
  w.f64(m.threshold);
  w.labels(m.classes);
  w.f64(m.reg);
  w.kernel(m.kernel);
  w.mat(m.training_inputs);
}
inline void read(ByteReader& r, KfdaModel& m) {
  m.dual_coefs = r.vec();
  m.threshold = r.f64();
  m.classes = r.labels();
  m.reg = r.f64();
  m.kernel = r.kernel();
  m.training_inputs = r.mat<RowMatrix>();
}

inline void write(ByteWriter& w, const SrdaModel& m) {
  w.labels(m.classes);
  w.vec(m.mean);
  w.mat(m.directions);
  w.mat(m.centroids);
}
inline void read(ByteReader& r, SrdaModel& m) {
  m.classes = r.labels();
  m.mean = r.vec();
  m.directions = r.mat<Matrix>();
  m.centroids = r.mat<Matrix>();
}

inline void write(ByteWriter& w, const SvmModel& m) {
  w.u16(std::uint16_t(m.task));
  w.kernel(m.kernel);
  w.f64(m.C);
  w.f64(m.epsilon);
  w.labels(m.classes);
  w.u64(m.training_size);
  w.u64(m.features);
  w.indices(m.support_indices);
  w.mat(m.support_vectors);
  w.u64(m.machines.size());
  for (const auto& b : m.machines) {
    w.i64(b.negative);
    w.i64(b.positive);
    w.indices(b.support);
    w.vec(b.coefs);
    w.f64(b.rho);
    w.f64(b.objective);
    w.u64(b.iterations);
  }
}
inline void read(ByteReader& r, SvmModel& m) {
  const auto task = r.u16();
  require(task <= std::uint16_t(SvmTask::Regression), "svm task");
  m.task = SvmTask(task);
  m.kernel = r.kernel();
  m.C = r.f64();
  m.epsilon = r.f64();
  m.classes = r.labels();
  m.training_size = Index(r.u64());
  m.features = Index(r.u64());
  m.support_indices = r.indices();
  m.support_vectors = r.mat<RowMatrix>();
  m.machines.resize(r.count(48));
  for (auto& b : m.machines) {
    b.negative = r.i64();
    b.positive = r.i64();
    b.support = r.indices();
    b.coefs = r.vec();
    b.rho = r.f64();
    b.objective = r.f64();
    b.iterations = Index(r.u64());
    require(Index(b.coefs.size()) == b.support.size(), "machine coefficient count");
    for (Index s : b.support) require(s < m.support_indices.size(), "machine support position");
  }
  if (m.kernel.needs_data())
    require(Index(m.support_vectors.rows()) == m.support_indices.size(), "support vector rows");
}

inline void write(ByteWriter& w, const KnnModel& m) {
  w.mat(m.inputs);
  w.labels(m.labels);
  w.labels(m.classes);
  w.u64(m.k);
}
inline void read(ByteReader& r, KnnModel& m) {
  m.inputs = r.mat<RowMatrix>();
  m.labels = r.labels();
  m.classes = r.labels();
  m.k = Index(r.u64());
  require(Index(m.inputs.rows()) == m.labels.size(), "knn label count");
  require(m.k >= 1 && m.k <= m.labels.size(), "knn k");
}

inline void write(ByteWriter& w, const ParzenModel& m) {
  w.labels(m.classes);
  w.vec(m.weights);
  w.f64(m.threshold);
  w.kernel(m.kernel);
  w.mat(m.training_inputs);
}
inline void read(ByteReader& r, ParzenModel& m) {
  m.classes = r.labels();
  m.weights = r.vec();
  m.threshold = r.f64();
  m.kernel = r.kernel();
  m.training_inputs = r.mat<RowMatrix>();
}

inline void write(ByteWriter& w, const TreeModel& m) {
  w.labels(m.classes);
  w.u64(m.features);
  w.u64(m.nodes.size());
  for (const auto& n : m.nodes) {
    w.flag(n.leaf);
    w.u64(n.feature);
    w.f64(n.threshold);
    w.u64(n.left);
    w.u64(n.right);
    w.i64(n.label);
    w.indices(n.counts);
    w.u64(n.depth);
  }
}
inline void read(ByteReader& r, TreeModel& m) {
  m.classes = r.labels();
  m.features = Index(r.u64());
  m.nodes.resize(r.count(57));
  for (Index id = 0; id < m.nodes.size(); ++id) {
    auto& n = m.nodes[id];
    n.leaf = r.flag();
    n.feature = Index(r.u64());
    n.threshold = r.f64();
    n.left = Index(r.u64());
    n.right = Index(r.u64());
    n.label = r.i64();
    n.counts = r.indices();
    n.depth = Index(r.u64());
    if (!n.leaf) {
      // children always follow their parent, which rules out cycles
      require(n.left > id && n.left < m.nodes.size() && n.right > id && n.right < m.nodes.size(), "tree links");
      require(n.feature < m.features, "tree split feature");
    }
  }
  require(!m.nodes.empty(), "empty tree");
}

inline void write(ByteWriter& w, const PcaModel& m) {
  w.vec(m.mean);
  w.mat(m.components);
  w.vec(m.eigenvalues);
}
inline void read(ByteReader& r, PcaModel& m) {
  m.mean = r.vec();
  m.components = r.mat<Matrix>();
  m.eigenvalues = r.vec();
  require(m.components.cols() == m.mean.size(), "pca component width");
}

inline void write(ByteWriter& w, const KpcaModel& m) {
  w.centering(m.centering);
  w.mat(m.dual_vectors);
  w.vec(m.eigenvalues);
  w.kernel(m.kernel);
  w.mat(m.training_inputs);
}
inline void read(ByteReader& r, KpcaModel& m) {
  m.centering = r.centering();
  m.dual_vectors = r.mat<Matrix>();
  m.eigenvalues = r.vec();
  m.kernel = r.kernel();
  m.training_inputs = r.mat<RowMatrix>();
  require(m.dual_vectors.cols() == m.eigenvalues.size(), "kpca component count");
}

template <std::size_t I = 0>
FittedModel read_alternative(ByteReader& r, std::size_t index) {
  if constexpr (I < std::variant_size_v<FittedModel>) {
    if (index == I) {
      std::variant_alternative_t<I, FittedModel> m;
      read(r, m);
      return m;
    }
    return read_alternative<I + 1>(r, index);
  } else {
    throw FormatError("unknown model kind");
  }
}

}  // namespace detail

inline std::string serialize_model(const FittedModel& m) {
  detail::ByteWriter w;
  w.raw(model_magic, sizeof model_magic);
  w.u16(model_format_version);
  w.u16(std::uint16_t(kind_of(m)));
  std::visit([&](const auto& model) { detail::write(w, model); }, m);
  return w.take();
}

/// Either a complete model or FormatError; nothing partial escapes.
inline FittedModel deserialize_model(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < sizeof model_magic || std::memcmp(bytes.data(), model_magic, sizeof model_magic) != 0)
    throw FormatError("not a model stream (bad magic bytes)");
  r.raw(sizeof model_magic);
  const auto version = r.u16();
  if (version != model_format_version)
    throw FormatError("unsupported model format version " + std::to_string(version) + ", expected " +
                      std::to_string(model_format_version));
  const auto kind = r.u16();
  if (kind < 1 || kind > std::variant_size_v<FittedModel>)
    throw FormatError("unknown model kind tag " + std::to_string(kind));
  auto m = detail::read_alternative(r, kind - 1);
  if (r.remaining() != 0)
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after " +
                      std::string(to_string(ModelKind(kind))) + " model");
  return m;
}

/// Typed load; a stream holding another kind is a FormatError.
template <class T>
T deserialize_as(std::string_view bytes) {
  auto m = deserialize_model(bytes);
  if (auto* p = std::get_if<T>(&m)) return std::move(*p);
  throw FormatError("model stream holds a " + std::string(to_string(kind_of(m))) + " model, not the requested kind");
}

inline void save_model(const std::string& path, const FittedModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidData("cannot write '" + path + "'");
  const auto bytes = serialize_model(m);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw InvalidData("short write to '" + path + "'");
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidData("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace mlcore
