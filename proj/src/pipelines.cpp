#include "retaug/pipelines.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "retaug/text.hpp"

namespace retaug {

namespace {

void embed_examples(const LabeledDataset& ds, const Encoder& enc, bool keep_alignment,
                    std::vector<Vec>& xs, std::vector<int>& ys, std::size_t* skipped) {
  xs.clear();
  ys.clear();
  for (const auto& e : ds.examples) {
    auto v = enc.encode(e.text);
    if (!v) {
      if (skipped) ++*skipped;
      if (keep_alignment) {
        xs.emplace_back();  // empty = unembeddable, scored as an error
        ys.push_back(e.label);
      }
      continue;
    }
    xs.push_back(std::move(*v));
    ys.push_back(e.label);
  }
}

std::size_t param_count_for(std::uint32_t dim, const std::vector<std::uint32_t>& hidden,
                            std::uint32_t n_classes) {
  std::size_t n = 0;
  std::uint32_t in = dim;
  for (auto h : hidden) {
    n += std::size_t(in) * h + h;
    in = h;
  }
  return n + std::size_t(in) * n_classes + n_classes;
}

// A candidate pool ready for annotation: ids, texts and unit-norm features.
// Features point into the bank matrix, or into `owned` for external pools.
struct CandidateSet {
  std::vector<std::uint64_t> ids;
  std::vector<const std::string*> texts;
  std::vector<const float*> features;
  std::vector<Vec> owned;
  std::size_t dropped = 0;
};

CandidateSet candidates_from_entries(const TaskContext& ctx, const std::vector<PoolEntry>& pool) {
  CandidateSet cs;
  const auto& m = *ctx.bank.vectors;
  cs.ids.reserve(pool.size());
  cs.texts.reserve(pool.size());
  cs.features.reserve(pool.size());
  for (const auto& e : pool) {
    cs.ids.push_back(e.id);
    cs.texts.push_back(&ctx.bank.records[e.id].text);
    cs.features.push_back(m.f32.data() + std::size_t(e.id) * m.dim);
  }
  return cs;
}

CandidateSet candidates_random(const TaskContext& ctx, std::uint64_t n, std::uint64_t seed) {
  const auto& m = *ctx.bank.vectors;
  std::vector<std::uint64_t> ids;
  ids.reserve(ctx.bank.count());
  for (std::uint64_t i = 0; i < ctx.bank.count(); ++i)
    if (!m.is_null(i)) ids.push_back(i);
  n = std::min<std::uint64_t>(n, ids.size());
  std::mt19937_64 rng(mix_seed(seed, 0x52));
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::uint64_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());

  CandidateSet cs;
  cs.ids = std::move(ids);
  cs.texts.reserve(cs.ids.size());
  cs.features.reserve(cs.ids.size());
  for (auto id : cs.ids) {
    cs.texts.push_back(&ctx.bank.records[id].text);
    cs.features.push_back(m.f32.data() + std::size_t(id) * m.dim);
  }
  return cs;
}

CandidateSet candidates_external(const TaskContext& ctx, const std::vector<std::string>& pool) {
  CandidateSet cs;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto v = ctx.encoder.encode(pool[i]);
    if (!v) {
      ++cs.dropped;
      continue;
    }
    cs.owned.push_back(std::move(*v));
    kept.push_back(i);
  }
  cs.ids.reserve(kept.size());
  cs.texts.reserve(kept.size());
  cs.features.reserve(kept.size());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    cs.ids.push_back(kept[j]);
    cs.texts.push_back(&pool[kept[j]]);
    cs.features.push_back(cs.owned[j].data());
  }
  if (cs.dropped)
    std::fprintf(stderr, "pool: dropped %zu sentences that failed to embed\n", cs.dropped);
  return cs;
}

const char* source_name(UnlabeledSource s) {
  switch (s) {
    case UnlabeledSource::retrieved: return "retrieved";
    case UnlabeledSource::random: return "random";
    case UnlabeledSource::ground_truth_pool: return "ground-truth";
  }
  return "?";
}

// Shared teacher->annotate->filter->student loop for the full-data
// protocols; only the candidate acquisition differs.
ExperimentReport run_teacher_student(const TaskContext& ctx, const ProtocolConfig& cfg,
                                     std::string protocol, UnlabeledSource source,
                                     const std::vector<std::string>* gt_pool) {
  if (!ctx.bank.vectors) throw std::invalid_argument(protocol + ": bank has no embeddings");
  if (ctx.bank.vectors->dtype != Dtype::f32)
    throw std::invalid_argument(protocol + ": pipelines need the float32 bank matrix");
  if (ctx.train_x.empty()) throw std::invalid_argument(protocol + ": no embeddable training data");
  if (ctx.test.examples.empty()) throw std::invalid_argument(protocol + ": empty test set");
  if (cfg.n_seeds < 1) throw std::invalid_argument(protocol + ": n_seeds must be >= 1");

  ExperimentReport rep;
  rep.protocol = std::move(protocol);
  StopWatch total;

  const std::uint32_t dim = ctx.encoder.dim();
  const auto n_classes = std::uint32_t(ctx.train.num_classes());

  AugmentConfig acfg;
  acfg.multiplier = cfg.multiplier;
  acfg.small_task_threshold = cfg.small_task_threshold;
  acfg.allow_shortfall = cfg.allow_shortfall;
  const std::uint64_t mult = choose_multiplier(ctx.train.size(), acfg);
  const std::uint64_t target = mult * ctx.train.size();
  const auto quotas = class_quotas(ctx.train.label_counts(), target);

  CandidateSet cands;
  {
    StopWatch t;
    switch (source) {
      case UnlabeledSource::retrieved: {
        auto qs = build_queries(ctx.train, cfg.query_mode, ctx.encoder);
        std::uint64_t per_q = cfg.pool_per_query
                                  ? cfg.pool_per_query
                                  : (20 * target + qs.queries.size() - 1) / qs.queries.size();
        FlatIndex index(MatrixViewRef::over(*ctx.bank.vectors), std::size_t(1) << 16, 10,
                        cfg.index_threads);
        cands = candidates_from_entries(ctx, retrieve_pool(qs, index, per_q));
        break;
      }
      case UnlabeledSource::random: {
        std::uint64_t want = cfg.pool_per_query ? cfg.pool_per_query * std::max<std::uint64_t>(
                                                      1, n_classes)
                                                : 20 * target;
        cands = candidates_random(ctx, want, cfg.base_seed);
        break;
      }
      case UnlabeledSource::ground_truth_pool: {
        if (!gt_pool) throw std::invalid_argument("ground-truth source needs a sentence pool");
        cands = candidates_external(ctx, *gt_pool);
        break;
      }
    }
    rep.timings_sec["pool_sec"] = t.seconds();
  }
  rep.pool_size = cands.ids.size();
  if (cands.ids.empty()) throw std::runtime_error(rep.protocol + ": empty candidate pool");

  std::unordered_map<std::uint64_t, std::size_t> by_id;
  by_id.reserve(cands.ids.size());
  for (std::size_t i = 0; i < cands.ids.size(); ++i) by_id.emplace(cands.ids[i], i);

  std::vector<std::string> train_texts;
  train_texts.reserve(ctx.train.size());
  for (const auto& e : ctx.train.examples) train_texts.push_back(e.text);

  double annotate_sec = 0.0, train_sec = 0.0;
  for (int si = 0; si < cfg.n_seeds; ++si) {
    const std::uint64_t seed_i = mix_seed(cfg.base_seed, std::uint64_t(si));

    StopWatch tt;
    TrainSpec tspec;
    tspec.loss = LossKind::cross_entropy;
    tspec.epochs = cfg.teacher_epochs;
    tspec.batch_size = cfg.batch_size;
    tspec.learning_rate = cfg.learning_rate;
    tspec.seed = mix_seed(seed_i, 1);
    auto teacher = train_classifier(dim, cfg.teacher_hidden, n_classes, ctx.train_x, ctx.train_y,
                                    {}, tspec);
    const auto teacher_acc = eval_accuracy(teacher.model, ctx.test_x, ctx.test_y);
    train_sec += tt.seconds();

    StopWatch ta;
    std::vector<SyntheticExample> pool_ex;
    pool_ex.reserve(cands.ids.size());
    for (std::size_t i = 0; i < cands.ids.size(); ++i)
      pool_ex.push_back(annotate_one(teacher.model, cands.ids[i], *cands.texts[i],
                                     std::span<const float>(cands.features[i], dim)));
    auto filtered = filter_synthetic(pool_ex, quotas, train_texts, cfg.allow_shortfall);
    annotate_sec += ta.seconds();

    std::vector<const std::string*> syn_texts;
    syn_texts.reserve(filtered.selected.size());
    for (const auto& ex : filtered.selected) syn_texts.push_back(&ex.text);
    rep.leakage_overlap = assert_no_leakage(syn_texts, ctx.test);
    rep.leakage_checked = true;

    StopWatch ts;
    std::vector<Vec> sx;
    std::vector<SoftLabel> st;
    std::vector<int> sy;
    sx.reserve(filtered.selected.size());
    for (const auto& ex : filtered.selected) {
      const float* f = cands.features[by_id.at(ex.id)];
      sx.emplace_back(f, f + dim);
      if (cfg.soft_labels)
        st.push_back(ex.probs);
      else
        sy.push_back(ex.assigned_class);
    }
    TrainSpec sspec;
    sspec.loss = cfg.soft_labels ? LossKind::kl : LossKind::cross_entropy;
    sspec.epochs = cfg.student_epochs;
    sspec.batch_size = cfg.batch_size;
    sspec.learning_rate = cfg.learning_rate;
    sspec.seed = mix_seed(seed_i, 2);
    auto student = train_classifier(dim, cfg.student_hidden, n_classes, sx, sy, st, sspec);
    const auto student_acc = eval_accuracy(student.model, ctx.test_x, ctx.test_y);
    train_sec += ts.seconds();

    SeedResult r;
    r.seed = seed_i;
    r.teacher_acc = teacher_acc.accuracy;
    r.student_acc = student_acc.accuracy;
    r.extra["filtered_size"] = double(filtered.selected.size());
    r.extra["shortfall_classes"] = double(filtered.shortfalls.size());
    if (si == 0) {
      rep.filtered_size = filtered.selected.size();
      rep.shortfalls = filtered.shortfalls;
    }
    rep.seeds.push_back(std::move(r));
  }

  rep.finalize();
  rep.metrics["multiplier"] = double(mult);
  rep.metrics["target_size"] = double(target);
  rep.timings_sec["annotate_sec"] = annotate_sec;
  rep.timings_sec["train_sec"] = train_sec;
  rep.timings_sec["total_sec"] = total.seconds();
  return rep;
}

}  // namespace

TaskContext prepare_task_context(LabeledDataset train, LabeledDataset valid, LabeledDataset test,
                                 const std::vector<std::string>& bank_sentences, Encoder encoder) {
  TaskContext ctx;
  ctx.train = std::move(train);
  ctx.valid = std::move(valid);
  ctx.test = std::move(test);
  ctx.encoder = std::move(encoder);
  ctx.train.validate();
  ctx.test.validate();

  SentenceBank bank = build_bank(bank_sentences);
  std::vector<std::string> test_texts;
  test_texts.reserve(ctx.test.size());
  for (const auto& e : ctx.test.examples) test_texts.push_back(e.text);
  ctx.bank = std::move(remove_overlap(bank, test_texts).bank);

  const std::uint32_t dim = ctx.encoder.dim();
  EmbeddingMatrix m = EmbeddingMatrix::zeros(dim, ctx.bank.count(), Dtype::f32);
  for (std::uint64_t i = 0; i < ctx.bank.count(); ++i) {
    auto v = ctx.encoder.encode(ctx.bank.records[i].text);
    if (v) m.set_row(i, *v);
  }
  ctx.bank.vectors = std::move(m);

  std::size_t skipped = 0;
  embed_examples(ctx.train, ctx.encoder, false, ctx.train_x, ctx.train_y, &skipped);
  if (skipped)
    std::fprintf(stderr, "prepare: %zu training examples failed to embed\n", skipped);
  if (ctx.train_x.empty()) throw std::runtime_error("prepare: no training example embeds");
  embed_examples(ctx.test, ctx.encoder, true, ctx.test_x, ctx.test_y, nullptr);
  embed_examples(ctx.valid, ctx.encoder, true, ctx.valid_x, ctx.valid_y, nullptr);
  return ctx;
}

std::uint64_t assert_no_leakage(const std::vector<const std::string*>& synthetic_texts,
                                const LabeledDataset& test) {
  std::unordered_set<std::string> test_norm;
  test_norm.reserve(test.size());
  for (const auto& e : test.examples) test_norm.insert(normalize(e.text));
  std::uint64_t overlap = 0;
  for (const auto* t : synthetic_texts) overlap += test_norm.count(normalize(*t));
  if (overlap)
    throw std::runtime_error("leakage: " + std::to_string(overlap) +
                             " synthetic sentences match test texts");
  return overlap;
}

std::vector<std::size_t> stratified_sample(const LabeledDataset& data, std::uint64_t n,
                                           std::uint64_t seed) {
  if (n > data.size())
    throw std::invalid_argument("stratified_sample: asked for more examples than exist");
  auto quotas = class_quotas(data.label_counts(), n);
  auto groups = data.by_label();
  std::mt19937_64 rng(mix_seed(seed, 0x5a));
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto idx = groups[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    if (quotas[c] > idx.size())
      throw std::runtime_error("stratified_sample: class " + std::to_string(c) +
                               " has too few examples");
    out.insert(out.end(), idx.begin(), idx.begin() + std::ptrdiff_t(quotas[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

UnlabeledSource parse_unlabeled_source(std::string_view name) {
  if (name == "retrieved" || name == "sa") return UnlabeledSource::retrieved;
  if (name == "random" || name == "rd") return UnlabeledSource::random;
  if (name == "ground-truth" || name == "gt") return UnlabeledSource::ground_truth_pool;
  throw std::invalid_argument("unknown unlabeled source: " + std::string(name));
}

ExperimentReport run_self_training(const TaskContext& ctx, const ProtocolConfig& cfg) {
  return run_teacher_student(ctx, cfg, "self-training", UnlabeledSource::retrieved, nullptr);
}

ExperimentReport run_distillation(const TaskContext& ctx, const ProtocolConfig& cfg,
                                  UnlabeledSource source,
                                  const std::vector<std::string>* gt_pool) {
  const std::uint32_t dim = ctx.encoder.dim();
  const auto n_classes = std::uint32_t(ctx.train.num_classes());
  const auto teacher_params = param_count_for(dim, cfg.teacher_hidden, n_classes);
  const auto student_params = param_count_for(dim, cfg.student_hidden, n_classes);
  if (student_params >= teacher_params)
    throw std::invalid_argument(
        "distillation: student must have fewer parameters than the teacher (" +
        std::to_string(student_params) + " vs " + std::to_string(teacher_params) + ")");
  return run_teacher_student(ctx, cfg, std::string("distillation:") + source_name(source), source,
                             gt_pool);
}

ExperimentReport run_few_shot(const TaskContext& ctx, const FewShotSpec& spec) {
  if (spec.top_models < 1 || spec.top_models > spec.n_seeds)
    throw std::invalid_argument("few-shot: need 1 <= top_models <= n_seeds");
  if (spec.n_train_sets < 1 || spec.n_per_class < 1)
    throw std::invalid_argument("few-shot: bad sampling shape");
  if (!ctx.bank.vectors || ctx.bank.vectors->dtype != Dtype::f32)
    throw std::invalid_argument("few-shot: bank has no float32 embeddings");

  const std::uint32_t dim = ctx.encoder.dim();
  const auto n_classes = std::uint32_t(ctx.train.num_classes());
  const auto counts = ctx.train.label_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < spec.n_per_class)
      throw std::invalid_argument("few-shot: class " + std::to_string(c) + " has " +
                                  std::to_string(counts[c]) + " examples, need " +
                                  std::to_string(spec.n_per_class));

  ExperimentReport rep;
  rep.protocol = "few-shot";
  StopWatch total;

  // fixed stratified validation sample, shared by every run
  auto vidx = stratified_sample(ctx.valid, spec.n_valid, mix_seed(spec.base_seed, 0x20));
  std::vector<Vec> vx;
  std::vector<int> vy;
  vx.reserve(vidx.size());
  for (auto i : vidx) {
    vx.push_back(ctx.valid_x[i]);
    vy.push_back(ctx.valid_y[i]);
  }

  // one shuffle per class; train sets take consecutive blocks, wrapping only
  // when a class runs out (so sets are disjoint where possible)
  auto groups = ctx.train.by_label();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::mt19937_64 rng(mix_seed(spec.base_seed, 0x100 + c));
    std::shuffle(groups[c].begin(), groups[c].end(), rng);
  }

  FlatIndex index(MatrixViewRef::over(*ctx.bank.vectors), std::size_t(1) << 16, 10,
                  spec.index_threads);

  FewShotVariantLog baseline{"baseline", {}, {}, 0.0, 0.0};
  FewShotVariantLog self_trained{"self_trained", {}, {}, 0.0, 0.0};
  std::uint64_t total_pool = 0, total_synth = 0;

  for (int s = 0; s < spec.n_train_sets; ++s) {
    std::vector<std::size_t> tidx;
    tidx.reserve(std::size_t(spec.n_per_class) * n_classes);
    for (std::size_t c = 0; c < groups.size(); ++c)
      for (std::uint32_t k = 0; k < spec.n_per_class; ++k)
        tidx.push_back(
            groups[c][(std::size_t(s) * spec.n_per_class + k) % groups[c].size()]);
    LabeledDataset subset = ctx.train.subset(tidx);

    std::vector<Vec> tx;
    std::vector<int> ty;
    embed_examples(subset, ctx.encoder, false, tx, ty, nullptr);
    if (tx.empty()) throw std::runtime_error("few-shot: train subset failed to embed");
    const std::uint64_t n_sup = tx.size();

    auto qs = build_queries(subset, QueryMode::label_average, ctx.encoder);
    const std::uint64_t pool_n = spec.pool_factor * n_sup;
    auto pool = retrieve_pool(qs, index, pool_n);
    if (pool.size() > pool_n) pool.resize(pool_n);  // keep the best-scoring entries
    auto cands = candidates_from_entries(ctx, pool);
    total_pool += cands.ids.size();

    const std::uint64_t synth_target = spec.augment_factor * n_sup;
    if (cands.ids.size() < synth_target)
      std::fprintf(stderr, "few-shot: pool %zu smaller than requested sample %llu, using all\n",
                   cands.ids.size(), (unsigned long long)synth_target);

    for (int j = 0; j < spec.n_seeds; ++j) {
      const std::uint64_t seed_sj =
          mix_seed(spec.base_seed, 0x1000 + std::uint64_t(s) * 1000 + std::uint64_t(j));

      TrainSpec tspec;
      tspec.loss = LossKind::cross_entropy;
      tspec.epochs = spec.epochs;
      tspec.batch_size = spec.batch_size;
      tspec.learning_rate = spec.learning_rate;
      tspec.seed = mix_seed(seed_sj, 1);
      auto teacher = train_classifier(dim, spec.hidden, n_classes, tx, ty, {}, tspec);
      const double t_valid = eval_accuracy(teacher.model, vx, vy).accuracy;
      const double t_test = eval_accuracy(teacher.model, ctx.test_x, ctx.test_y).accuracy;
      baseline.runs.push_back(FewShotRun{s, seed_sj, t_valid, t_test, false});

      // uniform sample of the pool, fresh per seed
      std::vector<std::size_t> order(cands.ids.size());
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(mix_seed(seed_sj, 2));
      const std::size_t take = std::min<std::size_t>(order.size(), synth_target);
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      order.resize(take);

      std::vector<Vec> sx;
      std::vector<SoftLabel> st;
      std::vector<int> sy;
      std::vector<const std::string*> syn_texts;
      sx.reserve(take + tx.size());
      for (auto i : order) {
        auto ex = annotate_one(teacher.model, cands.ids[i], *cands.texts[i],
                               std::span<const float>(cands.features[i], dim));
        sx.emplace_back(cands.features[i], cands.features[i] + dim);
        syn_texts.push_back(cands.texts[i]);
        if (spec.discrete_labels)
          sy.push_back(ex.assigned_class);
        else
          st.push_back(std::move(ex.probs));
      }
      rep.leakage_overlap = assert_no_leakage(syn_texts, ctx.test);
      rep.leakage_checked = true;
      total_synth += take;

      if (spec.include_ground_truth) {
        for (std::size_t i = 0; i < tx.size(); ++i) {
          sx.push_back(tx[i]);
          if (spec.discrete_labels) {
            sy.push_back(ty[i]);
          } else {
            SoftLabel one(n_classes, 0.0);
            one[std::size_t(ty[i])] = 1.0;
            st.push_back(std::move(one));
          }
        }
      }

      TrainSpec sspec;
      sspec.loss = spec.discrete_labels ? LossKind::cross_entropy : LossKind::kl;
      sspec.epochs = spec.epochs;
      sspec.batch_size = spec.batch_size;
      sspec.learning_rate = spec.learning_rate;
      sspec.seed = mix_seed(seed_sj, 3);
      auto student = train_classifier(dim, spec.hidden, n_classes, sx, sy, st, sspec);
      const double s_valid = eval_accuracy(student.model, vx, vy).accuracy;
      const double s_test = eval_accuracy(student.model, ctx.test_x, ctx.test_y).accuracy;
      self_trained.runs.push_back(FewShotRun{s, seed_sj, s_valid, s_test, false});
    }
  }

  // per train set: mean test accuracy of the top models by validation
  // accuracy (ties -> earlier seed)
  auto score_sets = [&](FewShotVariantLog& log) {
    for (int s = 0; s < spec.n_train_sets; ++s) {
      std::vector<std::size_t> runs;
      for (std::size_t i = 0; i < log.runs.size(); ++i)
        if (log.runs[i].train_set == s) runs.push_back(i);
      std::stable_sort(runs.begin(), runs.end(), [&](std::size_t a, std::size_t b) {
        return log.runs[a].valid_acc > log.runs[b].valid_acc;
      });
      double sum = 0.0;
      const std::size_t top = std::min<std::size_t>(runs.size(), std::size_t(spec.top_models));
      for (std::size_t i = 0; i < top; ++i) {
        log.runs[runs[i]].selected = true;
        sum += log.runs[runs[i]].test_acc;
      }
      log.per_set_score.push_back(sum / double(top));
    }
    log.mean = mean_of(log.per_set_score);
    log.stddev = pop_std(log.per_set_score);
  };
  score_sets(baseline);
  score_sets(self_trained);

  rep.metrics["baseline_mean"] = baseline.mean;
  rep.metrics["baseline_std"] = baseline.stddev;
  rep.metrics["self_trained_mean"] = self_trained.mean;
  rep.metrics["self_trained_std"] = self_trained.stddev;
  rep.pool_size = total_pool;
  rep.filtered_size = total_synth;
  rep.few_shot.push_back(std::move(baseline));
  rep.few_shot.push_back(std::move(self_trained));
  rep.timings_sec["total_sec"] = total.seconds();
  return rep;
}

}  // namespace retaug
