#include "cftc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "cftc/errors.hpp"
#include "cftc/hash.hpp"

namespace cftc {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'T', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void i64(std::int64_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  void mat(const Mat& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    raw(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()));
  }

  void vec(const Vec& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(Scalar) * static_cast<std::size_t>(v.size()));
  }

  void raw(const void* data, std::size_t size) {
    buffer_.append(static_cast<const char*>(data), size);
  }

  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() { return read_as<std::uint32_t>(); }
  std::uint64_t u64() { return read_as<std::uint64_t>(); }
  std::int64_t i64() { return read_as<std::int64_t>(); }
  double f64() { return read_as<double>(); }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }

  Mat mat() {
    const auto rows = static_cast<Index>(u64());
    const auto cols = static_cast<Index>(u64());
    if (rows < 0 || cols < 0 || rows > (1 << 28) || cols > (1 << 28)) {
      throw IntegrityError("checkpoint matrix dimensions corrupted");
    }
    Mat m(rows, cols);
    const std::size_t bytes = sizeof(Scalar) * static_cast<std::size_t>(m.size());
    need(bytes);
    std::memcpy(m.data(), data_ + pos_, bytes);
    pos_ += bytes;
    return m;
  }

  Vec vec() {
    const auto n = static_cast<Index>(u64());
    if (n < 0 || n > (1 << 28)) {
      throw IntegrityError("checkpoint vector size corrupted");
    }
    Vec v(n);
    const std::size_t bytes = sizeof(Scalar) * static_cast<std::size_t>(n);
    need(bytes);
    std::memcpy(v.data(), data_ + pos_, bytes);
    pos_ += bytes;
    return v;
  }

  void block(void* dest, std::size_t bytes) {
    need(bytes);
    std::memcpy(dest, data_ + pos_, bytes);
    pos_ += bytes;
  }

  bool done() const { return pos_ == size_; }

 private:
  template <typename T>
  T read_as() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t bytes) {
    if (pos_ + bytes > size_) {
      throw IntegrityError("checkpoint truncated or corrupted");
    }
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));

  const NetworkDims& dims = model.params.dims;
  w.u64(static_cast<std::uint64_t>(dims.vocab));
  w.u64(static_cast<std::uint64_t>(dims.labels));
  w.u64(static_cast<std::uint64_t>(dims.word_dim));
  w.u64(static_cast<std::uint64_t>(dims.hidden));
  w.u64(static_cast<std::uint64_t>(dims.label_dim));
  w.u64(static_cast<std::uint64_t>(dims.gcn_layers));
  w.f64(model.config.mu);
  w.u64(model.vocab.hash());
  w.u64(model.labels.hash());

  w.u64(static_cast<std::uint64_t>(model.vocab.size()));
  for (Index i = 0; i < model.vocab.size(); ++i) w.str(model.vocab.word(i));

  w.u64(static_cast<std::uint64_t>(model.labels.size()));
  for (Index i = 0; i < model.labels.size(); ++i) w.str(model.labels.name(i));
  for (Index i = 0; i < model.labels.size(); ++i) {
    w.i64(model.labels.counts()[static_cast<std::size_t>(i)]);
  }

  w.mat(model.cooccurrence.raw);
  w.mat(model.cooccurrence.normalized);
  w.vec(model.cooccurrence.degree);

  // The training log lives in training_log.csv; it carries wall-clock
  // timings, which would make checkpoint bytes differ across identical runs.
  w.str(model.config.to_key_values());

  auto views = tensor_views(model.params);
  w.u64(views.size());
  for (const auto& t : views) {
    w.str(t.name);
    w.u64(static_cast<std::uint64_t>(t.rows));
    w.u64(static_cast<std::uint64_t>(t.cols));
    w.raw(t.data, sizeof(Scalar) * static_cast<std::size_t>(t.size()));
  }

  const std::uint64_t checksum = fnv1a_bytes(w.buffer().data(), w.buffer().size());
  w.u64(checksum);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint: " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw ParseError("checkpoint write failed: " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) {
    throw IntegrityError("checkpoint too small: " + path.string());
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError("not a checkpoint file: " + path.string());
  }
  std::uint64_t stored_checksum = 0;
  std::memcpy(&stored_checksum, bytes.data() + bytes.size() - sizeof(std::uint64_t),
              sizeof(std::uint64_t));
  const std::uint64_t actual =
      fnv1a_bytes(bytes.data(), bytes.size() - sizeof(std::uint64_t));
  if (stored_checksum != actual) {
    throw IntegrityError("checkpoint checksum mismatch (truncated or corrupted): " +
                         path.string());
  }

  Reader r(bytes.data() + sizeof(kMagic),
           bytes.size() - sizeof(kMagic) - sizeof(std::uint64_t));

  NetworkDims dims;
  dims.vocab = static_cast<Index>(r.u64());
  dims.labels = static_cast<Index>(r.u64());
  dims.word_dim = static_cast<Index>(r.u64());
  dims.hidden = static_cast<Index>(r.u64());
  dims.label_dim = static_cast<Index>(r.u64());
  dims.gcn_layers = static_cast<Index>(r.u64());
  const Scalar mu = r.f64();
  const std::uint64_t vocab_hash = r.u64();
  const std::uint64_t label_hash = r.u64();

  const auto vocab_count = static_cast<Index>(r.u64());
  if (vocab_count != dims.vocab) {
    throw IntegrityError("vocabulary size does not match metadata");
  }
  if (vocab_count < 2) throw IntegrityError("vocabulary missing special entries");
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(vocab_count) - 2);
  for (Index i = 0; i < vocab_count; ++i) {
    std::string word = r.str();
    if (i >= 2) words.push_back(std::move(word));
  }
  Vocabulary vocab(std::move(words));

  const auto label_count = static_cast<Index>(r.u64());
  if (label_count != dims.labels) {
    throw IntegrityError("label count does not match metadata");
  }
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(label_count));
  for (Index i = 0; i < label_count; ++i) names.push_back(r.str());
  LabelSpace labels(std::move(names));
  for (Index i = 0; i < label_count; ++i) labels.set_count(i, r.i64());

  if (vocab.hash() != vocab_hash) {
    throw IntegrityError("vocabulary hash mismatch in checkpoint");
  }
  if (labels.hash() != label_hash) {
    throw IntegrityError("label-space hash mismatch in checkpoint");
  }

  TrainedModel model;
  model.vocab = std::move(vocab);
  model.labels = std::move(labels);
  model.cooccurrence.raw = r.mat();
  model.cooccurrence.normalized = r.mat();
  model.cooccurrence.degree = r.vec();
  if (model.cooccurrence.raw.rows() != dims.labels ||
      model.cooccurrence.normalized.rows() != dims.labels) {
    throw IntegrityError("cooccurrence size does not match metadata");
  }

  model.config = TrainingConfig::from_key_values(r.str());
  if (model.config.mu != mu) {
    throw IntegrityError("threshold metadata does not match config");
  }

  model.params = NetworkParameters::zeros(dims);
  auto views = tensor_views(model.params);
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < views.size(); ++i) by_name[views[i].name] = i;

  const std::uint64_t tensor_count = r.u64();
  if (tensor_count != views.size()) {
    throw IntegrityError("unexpected tensor count in checkpoint");
  }
  std::vector<bool> seen(views.size(), false);
  for (std::uint64_t t = 0; t < tensor_count; ++t) {
    const std::string name = r.str();
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw IntegrityError("unknown tensor in checkpoint: " + name);
    }
    TensorView& view = views[it->second];
    if (seen[it->second]) {
      throw IntegrityError("duplicate tensor in checkpoint: " + name);
    }
    seen[it->second] = true;
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (rows != view.rows || cols != view.cols) {
      throw IntegrityError("tensor shape mismatch for " + name);
    }
    r.block(view.data, sizeof(Scalar) * static_cast<std::size_t>(rows * cols));
  }
  if (!r.done()) {
    throw IntegrityError("trailing bytes in checkpoint: " + path.string());
  }
  return model;
}

}  // namespace cftc
