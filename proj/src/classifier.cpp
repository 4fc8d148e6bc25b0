#include "retaug/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "retaug/vectors.hpp"  // FormatError

namespace retaug {

double kl_div(const SoftLabel& target, const SoftLabel& predicted) {
  double s = 0.0;
  for (std::size_t c = 0; c < target.size(); ++c) {
    if (target[c] <= 0.0) continue;  // 0 * ln 0 == 0
    s += target[c] * std::log(target[c] / predicted[c]);
  }
  return s;
}

double cross_entropy(int target_class, const SoftLabel& predicted) {
  return -std::log(predicted[std::size_t(target_class)]);
}

int argmax_class(const SoftLabel& probs) {
  int best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[std::size_t(best)]) best = int(c);
  return best;
}

LossKind parse_loss(std::string_view name) {
  if (name == "ce" || name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "kl") return LossKind::kl;
  throw std::invalid_argument("unknown loss: " + std::string(name));
}

Classifier Classifier::init(std::uint32_t input_dim, const std::vector<std::uint32_t>& hidden_dims,
                            std::uint32_t num_classes, std::uint64_t seed) {
  if (input_dim == 0 || num_classes == 0)
    throw std::invalid_argument("classifier dims must be positive");
  for (auto h : hidden_dims)
    if (h == 0) throw std::invalid_argument("hidden layer width must be positive");

  Classifier m;
  m.input_dim_ = input_dim;
  m.num_classes_ = num_classes;
  m.hidden_dims_ = hidden_dims;

  std::mt19937_64 rng(seed);
  std::uint32_t in = input_dim;
  auto make_layer = [&](std::uint32_t out) {
    Layer l;
    l.in = in;
    l.out = out;
    l.w.resize(std::size_t(out) * in);
    l.b.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(double(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : l.w) v = dist(rng);
    m.layers_.push_back(std::move(l));
    in = out;
  };
  for (auto h : hidden_dims) make_layer(h);
  make_layer(num_classes);
  return m;
}

std::size_t Classifier::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

// activations[0] is the input; activations[i+1] is layer i's output
// (tanh for hidden layers, post-softmax probabilities for the last).
std::vector<std::vector<double>> forward_cached(const std::vector<Classifier::Layer>& layers,
                                                std::span<const double> x) {
  std::vector<std::vector<double>> acts;
  acts.reserve(layers.size() + 1);
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    std::vector<double> z(l.out);
    const auto& a = acts.back();
    for (std::uint32_t o = 0; o < l.out; ++o) {
      double s = l.b[o];
      const double* wrow = l.w.data() + std::size_t(o) * l.in;
      for (std::uint32_t i = 0; i < l.in; ++i) s += wrow[i] * a[i];
      z[o] = s;
    }
    if (li + 1 == layers.size()) {
      softmax_inplace(z);
    } else {
      for (auto& v : z) v = std::tanh(v);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

SoftLabel Classifier::forward(std::span<const double> x) const {
  if (x.size() != input_dim_) throw std::invalid_argument("forward: input dimension mismatch");
  return forward_cached(layers_, x).back();
}

SoftLabel Classifier::forward(std::span<const float> x) const {
  std::vector<double> xd(x.begin(), x.end());
  return forward(std::span<const double>(xd));
}

// ---------------------------------------------------------------------------
// Model file

namespace {
constexpr char kModelMagic[4] = {'S', 'A', 'M', 'D'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("model file truncated");
  return v;
}
}  // namespace

void Classifier::save(const std::string& path) const {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write(kModelMagic, 4);
    put<std::uint32_t>(out, 1);  // version
    put<std::uint32_t>(out, input_dim_);
    put<std::uint32_t>(out, num_classes_);
    put<std::uint32_t>(out, std::uint32_t(hidden_dims_.size()));
    for (auto h : hidden_dims_) put<std::uint32_t>(out, h);
    for (const auto& l : layers_) {
      for (double v : l.w) put<float>(out, float(v));
      for (double v : l.b) put<float>(out, float(v));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot commit model file: " + path);
}

Classifier Classifier::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    throw FormatError("bad model file magic: " + path);
  if (auto ver = get<std::uint32_t>(in); ver != 1)
    throw FormatError("unsupported model version " + std::to_string(ver));
  auto input_dim = get<std::uint32_t>(in);
  auto num_classes = get<std::uint32_t>(in);
  auto n_hidden = get<std::uint32_t>(in);
  std::vector<std::uint32_t> hidden(n_hidden);
  for (auto& h : hidden) h = get<std::uint32_t>(in);

  Classifier m = Classifier::init(input_dim, hidden, num_classes, 0);
  for (auto& l : m.layers_) {
    for (auto& v : l.w) v = double(get<float>(in));
    for (auto& v : l.b) v = double(get<float>(in));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

double batch_loss_and_grad(const Classifier& model, const std::vector<Vec>& features,
                           const std::vector<int>& hard_labels,
                           const std::vector<SoftLabel>& soft_labels, LossKind loss,
                           const std::vector<std::size_t>& batch, std::vector<double>* grad) {
  const auto& layers = model.layers();
  if (grad) grad->assign(model.param_count(), 0.0);

  double total = 0.0;
  std::vector<double> xd;
  for (std::size_t bi : batch) {
    const Vec& x = features[bi];
    xd.assign(x.begin(), x.end());
    auto acts = forward_cached(layers, xd);
    const auto& p = acts.back();

    if (loss == LossKind::cross_entropy) {
      total += cross_entropy(hard_labels[bi], p);
    } else {
      total += kl_div(soft_labels[bi], p);
    }
    if (!grad) continue;

    // dL/dlogit = p - t for both losses (t one-hot for cross-entropy)
    std::vector<double> delta = p;
    if (loss == LossKind::cross_entropy) {
      delta[std::size_t(hard_labels[bi])] -= 1.0;
    } else {
      for (std::size_t c = 0; c < delta.size(); ++c) delta[c] -= soft_labels[bi][c];
    }

    std::size_t goff = grad->size();
    for (std::size_t li = layers.size(); li-- > 0;) {
      const auto& l = layers[li];
      goff -= l.w.size() + l.b.size();
      double* gw = grad->data() + goff;
      double* gb = gw + l.w.size();
      const auto& a = acts[li];
      for (std::uint32_t o = 0; o < l.out; ++o) {
        const double d = delta[o];
        double* gwrow = gw + std::size_t(o) * l.in;
        for (std::uint32_t i = 0; i < l.in; ++i) gwrow[i] += d * a[i];
        gb[o] += d;
      }
      if (li == 0) break;
      // propagate through the tanh of the previous layer
      std::vector<double> prev(l.in, 0.0);
      for (std::uint32_t o = 0; o < l.out; ++o) {
        const double d = delta[o];
        const double* wrow = l.w.data() + std::size_t(o) * l.in;
        for (std::uint32_t i = 0; i < l.in; ++i) prev[i] += d * wrow[i];
      }
      for (std::uint32_t i = 0; i < l.in; ++i) prev[i] *= 1.0 - a[i] * a[i];
      delta = std::move(prev);
    }
  }

  const double inv = 1.0 / double(batch.size());
  if (grad)
    for (auto& g : *grad) g *= inv;
  return total * inv;
}

TrainResult train_classifier(std::uint32_t input_dim, const std::vector<std::uint32_t>& hidden_dims,
                             std::uint32_t num_classes, const std::vector<Vec>& features,
                             const std::vector<int>& hard_labels,
                             const std::vector<SoftLabel>& soft_labels, const TrainSpec& spec) {
  if (features.empty()) throw std::invalid_argument("train: no features");
  if (spec.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (spec.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (spec.loss == LossKind::cross_entropy) {
    if (hard_labels.size() != features.size())
      throw std::invalid_argument("train: cross-entropy needs one hard label per feature");
    for (int y : hard_labels)
      if (y < 0 || std::uint32_t(y) >= num_classes)
        throw std::invalid_argument("train: label id out of range");
  } else {
    if (soft_labels.size() != features.size())
      throw std::invalid_argument("train: kl needs one soft label per feature");
    for (const auto& t : soft_labels)
      if (t.size() != num_classes)
        throw std::invalid_argument("train: soft label arity mismatch");
  }
  for (const auto& f : features)
    if (f.size() != input_dim) throw std::invalid_argument("train: feature dimension mismatch");

  TrainResult res;
  res.model = Classifier::init(input_dim, hidden_dims, num_classes, mix_seed(spec.seed, 0));
  std::mt19937_64 shuffle_rng(mix_seed(spec.seed, 1));

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  std::vector<std::size_t> batch;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      std::size_t end = std::min(order.size(), start + spec.batch_size);
      batch.assign(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
      double loss = batch_loss_and_grad(res.model, features, hard_labels, soft_labels, spec.loss,
                                        batch, &grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_total += loss * double(batch.size());

      std::size_t goff = 0;
      for (auto& l : res.model.layers()) {
        for (auto& v : l.w) v -= spec.learning_rate * grad[goff++];
        for (auto& v : l.b) v -= spec.learning_rate * grad[goff++];
      }
    }
    res.epoch_loss.push_back(epoch_total / double(order.size()));
  }
  res.final_loss = res.epoch_loss.back();
  return res;
}

// ---------------------------------------------------------------------------
// Annotation

SyntheticExample annotate_one(const Classifier& model, std::uint64_t id, std::string text,
                              std::span<const float> feature) {
  SyntheticExample ex;
  ex.id = id;
  ex.text = std::move(text);
  ex.probs = model.forward(feature);
  ex.assigned_class = argmax_class(ex.probs);
  ex.confidence = ex.probs[std::size_t(ex.assigned_class)];
  return ex;
}

AnnotateResult annotate(const Classifier& model, const std::vector<std::string>& sentences,
                        const Encoder& encoder, const std::vector<std::uint64_t>* ids) {
  if (ids && ids->size() != sentences.size())
    throw std::invalid_argument("annotate: ids/sentences size mismatch");
  AnnotateResult res;
  res.examples.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto emb = encoder.encode(sentences[i]);
    if (!emb) {
      ++res.dropped;
      continue;
    }
    res.examples.push_back(
        annotate_one(model, ids ? (*ids)[i] : i, sentences[i], std::span<const float>(*emb)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic data file

void write_synthetic(const std::vector<SyntheticExample>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write synthetic file: " + path);
  char buf[32];
  for (const auto& ex : examples) {
    out << "{\"id\": " << ex.id << ", \"text\": " << nlohmann::json(ex.text).dump()
        << ", \"probs\": [";
    for (std::size_t c = 0; c < ex.probs.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.8g", ex.probs[c]);
      out << (c ? ", " : "") << buf;
    }
    std::snprintf(buf, sizeof buf, "%.8g", ex.confidence);
    out << "], \"confidence\": " << buf << "}\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<SyntheticExample> read_synthetic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open synthetic file: " + path);
  std::vector<SyntheticExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    SyntheticExample ex;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      ex.id = j.value("id", std::uint64_t(lineno - 1));
      ex.text = j.at("text").get<std::string>();
      ex.probs = j.at("probs").get<std::vector<double>>();
    } catch (const std::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (ex.probs.empty())
      throw FormatError(path + ":" + std::to_string(lineno) + ": empty probs");
    ex.assigned_class = argmax_class(ex.probs);
    ex.confidence = ex.probs[std::size_t(ex.assigned_class)];
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace retaug
