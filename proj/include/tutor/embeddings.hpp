#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tutor/document.hpp"
#include "tutor/error.hpp"

namespace tutor {

struct PvHyperparams {
  std::size_t dim = 50;
  std::size_t negatives = 5;
  std::size_t epochs = 40;
  double initial_lr = 0.025;
  std::size_t min_count = 2;
  std::uint64_t seed = 1;

  friend bool operator==(const PvHyperparams&, const PvHyperparams&) = default;
};

// Row-major |rows| x dim matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct VocabEntry {
  std::string stem;
  std::uint64_t count = 0;

  friend bool operator==(const VocabEntry&, const VocabEntry&) = default;
};

struct EmbeddingModel {
  PvHyperparams hp;
  std::vector<VocabEntry> vocab;  // count descending, then stem ascending
  std::unordered_map<std::string, std::size_t> index;
  Matrix word_output;             // |V| x D
  Matrix docs;                    // |docs| x D, train-time only (not persisted)
  std::vector<double> epoch_loss; // average pair loss per epoch, train-time only

  std::size_t dim() const { return hp.dim; }
  std::size_t vocab_size() const { return vocab.size(); }

  std::optional<std::size_t> lookup(std::string_view stem) const {
    auto it = index.find(std::string(stem));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

struct QuestionEmbedding {
  std::string question_id;
  std::vector<float> vector;
  std::string model_version;

  friend bool operator==(const QuestionEmbedding&, const QuestionEmbedding&) = default;
};

inline void to_json(nlohmann::json& j, const QuestionEmbedding& e) {
  j = nlohmann::json{{"question_id", e.question_id}, {"vector", e.vector}, {"model_version", e.model_version}};
}

inline void from_json(const nlohmann::json& j, QuestionEmbedding& e) {
  j.at("question_id").get_to(e.question_id);
  j.at("vector").get_to(e.vector);
  j.at("model_version").get_to(e.model_version);
}

namespace detail {

// Uniform in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

}  // namespace detail

// Negative-sampling loss of one (doc, word) pair:
//   L = -log σ(v·u_pos) - Σ_n log σ(-v·u_n)
template <typename T>
double pair_loss(std::span<const T> v, std::span<const T> pos,
                 std::span<const std::span<const T>> negs) {
  double loss = -detail::log_sigmoid(detail::dot(v, pos));
  for (const auto& n : negs) loss -= detail::log_sigmoid(-detail::dot(v, n));
  return loss;
}

// Loss plus its gradients with respect to v, u_pos and each u_n.
template <typename T>
double pair_gradient(std::span<const T> v, std::span<const T> pos,
                     std::span<const std::span<const T>> negs, std::span<T> grad_v,
                     std::span<T> grad_pos, std::span<const std::span<T>> grad_negs) {
  std::fill(grad_v.begin(), grad_v.end(), T(0));
  double x = detail::dot(v, pos);
  double loss = -detail::log_sigmoid(x);
  double g = detail::sigmoid(x) - 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    grad_v[i] += static_cast<T>(g * pos[i]);
    grad_pos[i] = static_cast<T>(g * v[i]);
  }
  for (std::size_t k = 0; k < negs.size(); ++k) {
    double xn = detail::dot(v, negs[k]);
    loss -= detail::log_sigmoid(-xn);
    double gn = detail::sigmoid(xn);
    for (std::size_t i = 0; i < v.size(); ++i) {
      grad_v[i] += static_cast<T>(gn * negs[k][i]);
      grad_negs[k][i] = static_cast<T>(gn * v[i]);
    }
  }
  return loss;
}

// Noise distribution over vocab indices, proportional to count^0.75.
class NoiseTable {
 public:
  explicit NoiseTable(const std::vector<VocabEntry>& vocab) {
    double total = 0;
    for (const auto& v : vocab) total += std::pow(static_cast<double>(v.count), 0.75);
    double acc = 0;
    for (const auto& v : vocab) {
      acc += std::pow(static_cast<double>(v.count), 0.75) / total;
      cumulative_.push_back(acc);
    }
    if (!cumulative_.empty()) cumulative_.back() = 1.0;
  }

  std::size_t sample(std::mt19937_64& rng) const {
    double u = detail::unit(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
  }

  double probability(std::size_t i) const {
    return cumulative_[i] - (i == 0 ? 0.0 : cumulative_[i - 1]);
  }

 private:
  std::vector<double> cumulative_;
};

namespace detail {

inline std::vector<VocabEntry> build_vocab(std::span<const std::vector<std::string>> docs,
                                           std::size_t min_count) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& d : docs)
    for (const auto& w : d) ++counts[w];
  std::vector<VocabEntry> vocab;
  for (const auto& [w, c] : counts)
    if (c >= min_count) vocab.push_back({w, c});
  std::stable_sort(vocab.begin(), vocab.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  return vocab;
}

inline void init_row(std::span<float> row, std::mt19937_64& rng) {
  float scale = 1.0f / static_cast<float>(row.size());
  for (auto& x : row) x = static_cast<float>(detail::unit(rng) - 0.5) * scale;
}

// Token ids of a document, out-of-vocabulary stems dropped.
inline std::vector<std::size_t> to_ids(const EmbeddingModel& m, std::span<const std::string> tokens) {
  std::vector<std::size_t> ids;
  for (const auto& t : tokens)
    if (auto i = m.lookup(t)) ids.push_back(*i);
  return ids;
}

// One SGD step on a (doc, word) pair. With `update` null the output
// matrix stays frozen (inference).
struct PairStepper {
  std::size_t dim;
  std::vector<float> grad_v, grad_pos;
  std::vector<std::vector<float>> grad_negs;
  std::vector<std::size_t> neg_ids;
  std::vector<std::span<const float>> negs;
  std::vector<std::span<float>> gnegs;

  PairStepper(std::size_t d, std::size_t k)
      : dim(d), grad_v(d), grad_pos(d), grad_negs(k, std::vector<float>(d)) {}

  double step(std::span<float> v, const Matrix& words, std::size_t word, const NoiseTable& noise,
              std::mt19937_64& rng, double lr, Matrix* update) {
    negs.clear();
    gnegs.clear();
    neg_ids.clear();
    for (std::size_t k = 0; k < grad_negs.size(); ++k) {
      std::size_t n = noise.sample(rng);
      if (n == word) continue;
      neg_ids.push_back(n);
      negs.push_back(words.row(n));
      gnegs.push_back(grad_negs[k]);
    }
    double loss = pair_gradient<float>(v, words.row(word), negs, grad_v, grad_pos, gnegs);
    if (update != nullptr) {
      auto pos = update->row(word);
      for (std::size_t i = 0; i < dim; ++i) pos[i] -= static_cast<float>(lr * grad_pos[i]);
      for (std::size_t k = 0; k < neg_ids.size(); ++k) {
        auto row = update->row(neg_ids[k]);
        for (std::size_t i = 0; i < dim; ++i) row[i] -= static_cast<float>(lr * gnegs[k][i]);
      }
    }
    for (std::size_t i = 0; i < dim; ++i) v[i] -= static_cast<float>(lr * grad_v[i]);
    return loss;
  }
};

// Linear decay from lr to lr/100 over the whole run.
inline double decayed_lr(double lr, std::size_t step, std::size_t total) {
  if (total <= 1) return lr;
  double progress = static_cast<double>(step) / static_cast<double>(total - 1);
  return lr * (1.0 - 0.99 * progress);
}

}  // namespace detail

// PV-DBOW with negative sampling. Single-threaded and bit-reproducible for
// a fixed seed.
inline EmbeddingModel train(std::span<const std::vector<std::string>> docs, const PvHyperparams& hp = {}) {
  if (docs.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 documents");
  if (hp.dim == 0 || hp.epochs == 0) throw Error(ErrorCode::kInvalidArgument, "dim and epochs must be positive");
  EmbeddingModel m;
  m.hp = hp;
  m.vocab = detail::build_vocab(docs, hp.min_count);
  if (m.vocab.empty()) throw Error(ErrorCode::kValidation, "degenerate corpus");
  for (std::size_t i = 0; i < m.vocab.size(); ++i) m.index.emplace(m.vocab[i].stem, i);

  std::mt19937_64 rng(hp.seed);
  m.word_output = Matrix(m.vocab.size(), hp.dim);
  m.docs = Matrix(docs.size(), hp.dim);
  for (std::size_t d = 0; d < docs.size(); ++d) detail::init_row(m.docs.row(d), rng);

  std::vector<std::vector<std::size_t>> ids;
  std::size_t pairs_per_epoch = 0;
  for (const auto& d : docs) {
    ids.push_back(detail::to_ids(m, d));
    pairs_per_epoch += ids.back().size();
  }
  NoiseTable noise(m.vocab);
  detail::PairStepper stepper(hp.dim, hp.negatives);
  std::size_t total = pairs_per_epoch * hp.epochs;
  std::size_t step = 0;
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    double loss = 0;
    for (std::size_t d = 0; d < ids.size(); ++d) {
      for (std::size_t w : ids[d]) {
        double lr = detail::decayed_lr(hp.initial_lr, step++, total);
        loss += stepper.step(m.docs.row(d), m.word_output, w, noise, rng, lr, &m.word_output);
      }
    }
    m.epoch_loss.push_back(loss / static_cast<double>(pairs_per_epoch));
  }
  for (float x : m.word_output.data)
    if (!std::isfinite(x)) throw Error(ErrorCode::kInternal, "training diverged");
  return m;
}

// Fresh document vector fitted against the frozen output matrix.
inline std::vector<float> infer(const EmbeddingModel& m, std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "empty token list");
  auto ids = detail::to_ids(m, tokens);
  if (ids.empty()) throw Error(ErrorCode::kValidation, "out-of-vocabulary source");
  std::mt19937_64 rng(m.hp.seed);
  std::vector<float> v(m.hp.dim);
  detail::init_row(v, rng);
  NoiseTable noise(m.vocab);
  detail::PairStepper stepper(m.hp.dim, m.hp.negatives);
  std::size_t total = ids.size() * m.hp.epochs;
  std::size_t step = 0;
  for (std::size_t e = 0; e < m.hp.epochs; ++e) {
    for (std::size_t w : ids) {
      stepper.step(v, m.word_output, w, noise, rng, detail::decayed_lr(m.hp.initial_lr, step++, total), nullptr);
    }
  }
  return v;
}

template <typename T>
double cosine(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidArgument, "dimension mismatch");
  double na = std::sqrt(detail::dot(a, a));
  double nb = std::sqrt(detail::dot(b, b));
  if (na == 0 || nb == 0) throw Error(ErrorCode::kInvalidArgument, "degenerate vector");
  return std::clamp(detail::dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  return cosine<float>(std::span<const float>(a), std::span<const float>(b));
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return cosine<double>(std::span<const double>(a), std::span<const double>(b));
}

inline constexpr std::size_t kDefaultRecommendations = 3;

// The k most similar other questions, cosine descending, ties by id.
inline std::vector<std::string> recommend(std::string_view q, std::span<const QuestionEmbedding> store,
                                          std::size_t k = kDefaultRecommendations) {
  auto self = std::find_if(store.begin(), store.end(),
                           [&](const QuestionEmbedding& e) { return e.question_id == q; });
  if (self == store.end()) throw Error(ErrorCode::kNotFound, "unknown question " + std::string(q));
  std::vector<std::pair<double, const std::string*>> ranked;
  for (const auto& e : store) {
    if (e.question_id == q) continue;
    ranked.emplace_back(cosine(self->vector, e.vector), &e.question_id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(*ranked[i].second);
  return out;
}

// Binary model file:
//   "PVDB" u32 version u32 D u32 |V|
//   u32 negatives u32 epochs f64 initial_lr u32 min_count u64 seed
//   |V| x (u32 length, bytes, u64 count)
//   |V| x D f32 word output matrix, row-major
// All integers and floats little-endian.
namespace detail {

inline constexpr std::uint32_t kPvVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFF);
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::kIo, "truncated model file");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const EmbeddingModel& m) {
  std::string out = "PVDB";
  detail::put<std::uint32_t>(out, detail::kPvVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hp.dim));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.vocab.size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hp.negatives));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hp.epochs));
  detail::put<double>(out, m.hp.initial_lr);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.hp.min_count));
  detail::put<std::uint64_t>(out, m.hp.seed);
  for (const auto& v : m.vocab) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(v.stem.size()));
    out += v.stem;
    detail::put<std::uint64_t>(out, v.count);
  }
  for (float x : m.word_output.data) detail::put<float>(out, x);
  return out;
}

inline EmbeddingModel deserialize_model(std::string_view data) {
  detail::Reader r(data);
  if (r.bytes(4) != "PVDB") throw Error(ErrorCode::kIo, "not a PVDB model file");
  if (auto v = r.get<std::uint32_t>(); v != detail::kPvVersion) {
    throw Error(ErrorCode::kIo, "unsupported model version " + std::to_string(v));
  }
  EmbeddingModel m;
  m.hp.dim = r.get<std::uint32_t>();
  std::size_t n = r.get<std::uint32_t>();
  m.hp.negatives = r.get<std::uint32_t>();
  m.hp.epochs = r.get<std::uint32_t>();
  m.hp.initial_lr = r.get<double>();
  m.hp.min_count = r.get<std::uint32_t>();
  m.hp.seed = r.get<std::uint64_t>();
  for (std::size_t i = 0; i < n; ++i) {
    VocabEntry e;
    e.stem = r.bytes(r.get<std::uint32_t>());
    e.count = r.get<std::uint64_t>();
    m.index.emplace(e.stem, i);
    m.vocab.push_back(std::move(e));
  }
  m.word_output = Matrix(n, m.hp.dim);
  for (auto& x : m.word_output.data) {
    x = r.get<float>();
    if (!std::isfinite(x)) throw Error(ErrorCode::kIo, "non-finite weight in model file");
  }
  if (!r.done()) throw Error(ErrorCode::kIo, "trailing bytes in model file");
  return m;
}

// Stable identifier of a model's persisted content.
inline std::string model_version(const EmbeddingModel& m) {
  return sha256_hex(serialize_model(m)).substr(0, 16);
}

inline void save_model(const EmbeddingModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    auto bytes = serialize_model(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline EmbeddingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "no model at " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace tutor
