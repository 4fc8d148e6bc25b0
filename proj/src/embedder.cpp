#include "retaug/embedder.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "retaug/text.hpp"
#include "retaug/vectors.hpp"

namespace retaug {

std::optional<Vec> embed_avg(std::string_view sentence, const WordVectorTable& table) {
  std::vector<double> acc(table.dim, 0.0);
  std::size_t in_vocab = 0;
  for (auto tok : tokenize(sentence)) {
    const float* v = table.find(tok);
    if (!v) continue;
    for (std::uint32_t j = 0; j < table.dim; ++j) acc[j] += v[j];
    ++in_vocab;
  }
  if (in_vocab == 0) return std::nullopt;
  Vec out(table.dim);
  for (std::uint32_t j = 0; j < table.dim; ++j) out[j] = float(acc[j] / double(in_vocab));
  if (!l2_normalize(out)) return std::nullopt;
  return out;
}

std::optional<std::vector<double>> sif_raw_average(std::string_view sentence,
                                                   const WordVectorTable& table, double a) {
  if (!table.has_probs())
    throw std::logic_error("sif requires estimated unigram probabilities");
  std::vector<double> acc(table.dim, 0.0);
  double weight_sum = 0.0;
  for (auto tok : tokenize(sentence)) {
    auto it = table.vocab.find(std::string(tok));
    if (it == table.vocab.end()) continue;
    double w = a / (a + table.unigram_prob[it->second]);
    auto v = table.vec(it->second);
    for (std::uint32_t j = 0; j < table.dim; ++j) acc[j] += w * double(v[j]);
    weight_sum += w;
  }
  if (weight_sum == 0.0) return std::nullopt;
  for (auto& x : acc) x /= weight_sum;
  return acc;
}

SifParams fit_sif(const std::vector<std::vector<double>>& sample, double a) {
  if (a <= 0.0) throw std::invalid_argument("sif parameter a must be positive");
  if (sample.size() < 1000)
    throw std::invalid_argument("fit_sif needs a sample of at least 1000 vectors");
  const std::size_t dim = sample.front().size();

  // Deterministic start: the coordinate axis with the most energy.
  std::vector<double> energy(dim, 0.0);
  double total = 0.0;
  for (const auto& x : sample)
    for (std::size_t j = 0; j < dim; ++j) {
      energy[j] += x[j] * x[j];
      total += x[j] * x[j];
    }
  if (total < 1e-24) throw std::runtime_error("degenerate sif sample: zero variance");
  std::size_t start = std::size_t(std::max_element(energy.begin(), energy.end()) - energy.begin());

  std::vector<double> v(dim, 0.0), next(dim);
  v[start] = 1.0;
  double eigenvalue = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto& x : sample) {
      double proj = dotd(std::span<const double>(x), std::span<const double>(v));
      for (std::size_t j = 0; j < dim; ++j) next[j] += proj * x[j];
    }
    eigenvalue = l2_norm(std::span<const double>(next));
    if (eigenvalue < 1e-24) throw std::runtime_error("degenerate sif sample: zero variance");
    for (auto& x : next) x /= eigenvalue;
    double sign = dotd(std::span<const double>(next), std::span<const double>(v)) < 0 ? -1.0 : 1.0;
    double delta = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double d = next[j] - sign * v[j];
      delta += d * d;
    }
    v = next;
    if (std::sqrt(delta) < 1e-9) break;
  }

  SifParams params;
  params.a = a;
  params.eigenvalue = eigenvalue;
  params.pc.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) params.pc[j] = float(v[j]);
  l2_normalize(params.pc);
  return params;
}

std::optional<Vec> embed_sif(std::string_view sentence, const WordVectorTable& table,
                             const SifParams& params) {
  auto raw = sif_raw_average(sentence, table, params.a);
  if (!raw) return std::nullopt;
  std::vector<double>& v = *raw;
  if (!params.pc.empty()) {
    double proj = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) proj += v[j] * double(params.pc[j]);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= proj * double(params.pc[j]);
  }
  Vec out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = float(v[j]);
  if (!l2_normalize(out)) return std::nullopt;
  return out;
}

void save_sif(const SifParams& params, const WordVectorTable& table, const std::string& path) {
  nlohmann::json j;
  j["a"] = params.a;
  j["eigenvalue"] = params.eigenvalue;
  j["pc"] = params.pc;
  nlohmann::json probs = nlohmann::json::object();
  for (std::size_t r = 0; r < table.tokens.size(); ++r) {
    if (!table.unigram_prob.empty() && table.unigram_prob[r] > 0.0)
      probs[table.tokens[r]] = table.unigram_prob[r];
  }
  j["unigram"] = std::move(probs);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << j.dump() << "\n";
}

SifParams load_sif(const std::string& path, WordVectorTable& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sif model: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  SifParams params;
  params.a = j.at("a").get<double>();
  params.eigenvalue = j.value("eigenvalue", 0.0);
  params.pc = j.at("pc").get<Vec>();
  table.unigram_prob.assign(table.tokens.size(), 0.0);
  for (auto& [tok, p] : j.at("unigram").items()) {
    auto it = table.vocab.find(tok);
    if (it != table.vocab.end()) table.unigram_prob[it->second] = p.get<double>();
  }
  return params;
}

double triplet_loss(std::span<const float> x, std::span<const float> y,
                    std::span<const float> y_c, double alpha) {
  double z = alpha - dotd(x, y) + dotd(x, y_c);
  return z > 0.0 ? z : 0.0;
}

double triplet_loss(const TrainingTriple& t, double alpha) {
  return triplet_loss(t.x, t.y, t.y_c, alpha);
}

std::size_t hard_negative(std::span<const float> anchor, const std::vector<Vec>& batch_positives,
                          std::size_t own_index) {
  if (batch_positives.size() < 2)
    throw std::invalid_argument("hard_negative needs a batch of at least 2");
  std::size_t best = std::size_t(-1);
  double best_cos = 0.0;
  for (std::size_t j = 0; j < batch_positives.size(); ++j) {
    if (j == own_index) continue;
    double c = dotd(anchor, batch_positives[j]);
    if (best == std::size_t(-1) || c > best_cos) {
      best = j;
      best_cos = c;
    }
  }
  return best;
}

ProjectionEncoder ProjectionEncoder::identity(std::uint32_t d) {
  ProjectionEncoder enc;
  enc.d_in = enc.d_out = d;
  enc.w.assign(std::size_t(d) * d, 0.0);
  for (std::uint32_t i = 0; i < d; ++i) enc.w[std::size_t(i) * d + i] = 1.0;
  return enc;
}

ProjectionEncoder ProjectionEncoder::random_init(std::uint32_t d_out, std::uint32_t d_in,
                                                 std::uint64_t seed) {
  ProjectionEncoder enc;
  enc.d_in = d_in;
  enc.d_out = d_out;
  enc.w.resize(std::size_t(d_out) * d_in);
  std::mt19937_64 rng(seed);
  double bound = 1.0 / std::sqrt(double(d_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : enc.w) x = dist(rng);
  return enc;
}

std::optional<Vec> ProjectionEncoder::project(std::span<const float> features) const {
  Vec out(d_out);
  for (std::uint32_t i = 0; i < d_out; ++i) {
    double s = 0.0;
    const double* row = w.data() + std::size_t(i) * d_in;
    for (std::uint32_t j = 0; j < d_in; ++j) s += row[j] * double(features[j]);
    out[i] = float(s);
  }
  if (!l2_normalize(out)) return std::nullopt;
  return out;
}

std::optional<Vec> ProjectionEncoder::encode(std::string_view sentence,
                                             const WordVectorTable& table) const {
  auto base = embed_avg(sentence, table);
  if (!base) return std::nullopt;
  return project(*base);
}

void ProjectionEncoder::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out.write("SAPJ", 4);
  std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&d_out), 4);
  out.write(reinterpret_cast<const char*>(&d_in), 4);
  std::vector<float> wf(w.begin(), w.end());
  out.write(reinterpret_cast<const char*>(wf.data()), std::streamsize(wf.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

ProjectionEncoder ProjectionEncoder::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open projection model: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SAPJ", 4) != 0)
    throw FormatError("bad magic in projection model: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw FormatError("unsupported projection model version");
  ProjectionEncoder enc;
  in.read(reinterpret_cast<char*>(&enc.d_out), 4);
  in.read(reinterpret_cast<char*>(&enc.d_in), 4);
  std::vector<float> wf(std::size_t(enc.d_out) * enc.d_in);
  in.read(reinterpret_cast<char*>(wf.data()), std::streamsize(wf.size() * sizeof(float)));
  if (!in) throw FormatError("truncated projection model: " + path);
  enc.w.assign(wf.begin(), wf.end());
  return enc;
}

namespace {

// encoded = normalize(W f); returns norm of W f through `norm`.
std::vector<double> project_raw(const std::vector<double>& w, std::uint32_t d_out,
                                std::uint32_t d_in, std::span<const float> f, double* norm) {
  std::vector<double> u(d_out, 0.0);
  for (std::uint32_t i = 0; i < d_out; ++i) {
    const double* row = w.data() + std::size_t(i) * d_in;
    double s = 0.0;
    for (std::uint32_t j = 0; j < d_in; ++j) s += row[j] * double(f[j]);
    u[i] = s;
  }
  *norm = l2_norm(std::span<const double>(u));
  if (*norm > 0)
    for (auto& x : u) x /= *norm;
  return u;
}

}  // namespace

std::vector<std::size_t> assign_hard_negatives(const std::vector<double>& w, std::uint32_t d_out,
                                               std::uint32_t d_in, const std::vector<Vec>& fx,
                                               const std::vector<Vec>& fy) {
  const std::size_t b = fx.size();
  std::vector<std::vector<double>> ex(b), ey(b);
  double norm;
  for (std::size_t i = 0; i < b; ++i) {
    ex[i] = project_raw(w, d_out, d_in, fx[i], &norm);
    ey[i] = project_raw(w, d_out, d_in, fy[i], &norm);
  }
  std::vector<std::size_t> negatives(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = std::size_t(-1);
    double best_cos = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      double c = dotd(std::span<const double>(ex[i]), std::span<const double>(ey[j]));
      if (best == std::size_t(-1) || c > best_cos) {
        best = j;
        best_cos = c;
      }
    }
    negatives[i] = best;
  }
  return negatives;
}

double projection_batch_loss(const std::vector<double>& w, std::uint32_t d_out, std::uint32_t d_in,
                             const std::vector<Vec>& fx, const std::vector<Vec>& fy,
                             const std::vector<std::size_t>& negatives, double alpha,
                             std::vector<double>* grad) {
  const std::size_t b = fx.size();
  if (grad) grad->assign(w.size(), 0.0);

  std::vector<std::vector<double>> ex(b), ey(b);
  std::vector<double> nx(b), ny(b);
  for (std::size_t i = 0; i < b; ++i) {
    ex[i] = project_raw(w, d_out, d_in, fx[i], &nx[i]);
    ey[i] = project_raw(w, d_out, d_in, fy[i], &ny[i]);
  }

  // grad of (c . e_i) w.r.t. the pre-normalization vector u_i, then
  // rank-1 update into dW rows with the input features.
  auto add_outer = [&](std::vector<double>& g, const std::vector<double>& e, double n,
                       const std::vector<double>& c, std::span<const float> f, double coef) {
    if (n <= 0) return;
    double ce = dotd(std::span<const double>(c), std::span<const double>(e));
    for (std::uint32_t i = 0; i < d_out; ++i) {
      double gu = coef * (c[i] - ce * e[i]) / n;
      double* row = g.data() + std::size_t(i) * d_in;
      for (std::uint32_t j = 0; j < d_in; ++j) row[j] += gu * double(f[j]);
    }
  };

  double total = 0.0;
  const double inv_b = 1.0 / double(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t neg = negatives[i];
    double cos_pos = dotd(std::span<const double>(ex[i]), std::span<const double>(ey[i]));
    double cos_neg = dotd(std::span<const double>(ex[i]), std::span<const double>(ey[neg]));
    double z = alpha - cos_pos + cos_neg;
    if (z <= 0.0) continue;  // subgradient 0 at and past the hinge
    total += z;
    if (!grad) continue;
    // d z / d ex_i comes from both cosine terms.
    std::vector<double> c(d_out);
    for (std::uint32_t k = 0; k < d_out; ++k) c[k] = ey[neg][k] - ey[i][k];
    add_outer(*grad, ex[i], nx[i], c, fx[i], inv_b);
    // d z / d ey_i = -ex_i ; d z / d ey_neg = +ex_i.
    for (std::uint32_t k = 0; k < d_out; ++k) c[k] = -ex[i][k];
    add_outer(*grad, ey[i], ny[i], c, fy[i], inv_b);
    for (std::uint32_t k = 0; k < d_out; ++k) c[k] = ex[i][k];
    add_outer(*grad, ey[neg], ny[neg], c, fy[neg], inv_b);
  }
  return total * inv_b;
}

TrainProjectionResult train_projection(const std::vector<std::pair<std::string, std::string>>& pairs,
                                       const WordVectorTable& table, const TripletConfig& cfg,
                                       std::uint32_t d_out) {
  if (pairs.empty()) throw std::invalid_argument("train_projection: no pairs");
  if (cfg.margin <= 0.0) throw std::invalid_argument("margin must be positive");

  TrainProjectionResult res;
  std::vector<Vec> fx, fy;
  fx.reserve(pairs.size());
  fy.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    auto ea = embed_avg(a, table);
    auto eb = embed_avg(b, table);
    if (!ea || !eb) {
      ++res.pairs_dropped;
      continue;
    }
    fx.push_back(std::move(*ea));
    fy.push_back(std::move(*eb));
  }
  res.pairs_used = fx.size();
  if (fx.empty()) throw std::runtime_error("train_projection: every pair failed to embed");
  if (res.pairs_used * 10 < pairs.size() * 9)
    std::fprintf(stderr, "[train_projection] warning: only %zu/%zu pairs embeddable\n",
                 res.pairs_used, pairs.size());

  const std::uint32_t din = table.dim;
  const std::uint32_t dout = d_out == 0 ? din : d_out;
  res.encoder = (dout == din) ? ProjectionEncoder::identity(din)
                              : ProjectionEncoder::random_init(dout, din, cfg.seed);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(fx.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      if (end - begin < 2) continue;  // hard negatives need at least 2 pairs
      std::vector<Vec> bx, by;
      bx.reserve(end - begin);
      by.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        bx.push_back(fx[order[k]]);
        by.push_back(fy[order[k]]);
      }
      auto negatives = assign_hard_negatives(res.encoder.w, dout, din, bx, by);
      double loss = projection_batch_loss(res.encoder.w, dout, din, bx, by, negatives,
                                          cfg.margin, &grad);
      for (std::size_t i = 0; i < grad.size(); ++i)
        res.encoder.w[i] -= cfg.learning_rate * grad[i];
      epoch_loss += loss;
      ++batches;
    }
    res.epoch_loss.push_back(batches ? epoch_loss / double(batches) : 0.0);
  }
  return res;
}

Encoder::Backend Encoder::parse_backend(std::string_view name) {
  if (name == "avg") return Backend::avg;
  if (name == "sif") return Backend::sif;
  if (name == "proj") return Backend::proj;
  throw std::invalid_argument("unknown encoder backend: " + std::string(name));
}

const char* Encoder::backend_name(Backend b) {
  switch (b) {
    case Backend::avg: return "avg";
    case Backend::sif: return "sif";
    case Backend::proj: return "proj";
  }
  return "?";
}

Encoder::Encoder(Backend backend, std::shared_ptr<const WordVectorTable> table,
                 std::optional<SifParams> sif, std::optional<ProjectionEncoder> proj)
    : backend_(backend), table_(std::move(table)), sif_(std::move(sif)), proj_(std::move(proj)) {
  if (!table_) throw std::invalid_argument("encoder needs a word vector table");
  if (backend_ == Backend::sif && !sif_) throw std::invalid_argument("sif backend needs SifParams");
  if (backend_ == Backend::proj && !proj_)
    throw std::invalid_argument("proj backend needs a ProjectionEncoder");
}

std::optional<Vec> Encoder::encode(std::string_view sentence) const {
  switch (backend_) {
    case Backend::avg: return embed_avg(sentence, *table_);
    case Backend::sif: return embed_sif(sentence, *table_, *sif_);
    case Backend::proj: return proj_->encode(sentence, *table_);
  }
  return std::nullopt;
}

std::uint32_t Encoder::dim() const {
  if (backend_ == Backend::proj) return proj_->d_out;
  return table_->dim;
}

}  // namespace retaug
