// Command-line front end: bank construction, embedding, retrieval, the
// teacher/student trainers and the three experiment pipelines.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retaug/augment.hpp"
#include "retaug/bank.hpp"
#include "retaug/classifier.hpp"
#include "retaug/config.hpp"
#include "retaug/dataset.hpp"
#include "retaug/embedder.hpp"
#include "retaug/eval.hpp"
#include "retaug/index.hpp"
#include "retaug/pipelines.hpp"
#include "retaug/queries.hpp"
#include "retaug/report.hpp"
#include "retaug/synth.hpp"
#include "retaug/text.hpp"
#include "retaug/vectors.hpp"
#include "retaug/word_vectors.hpp"

namespace fs = std::filesystem;
using namespace retaug;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::uint32_t> parse_hidden(const std::string& s) {
  std::vector<std::uint32_t> dims;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    auto piece = s.substr(pos, comma - pos);
    if (!piece.empty()) dims.push_back(std::uint32_t(std::stoul(piece)));
    pos = comma + 1;
  }
  return dims;
}

// ---------------------------------------------------------------------------
// Encoder assembly shared by most subcommands

struct EncoderOpts {
  std::string backend = "avg";
  std::string word_vectors;
  std::string sif_model;
  std::string proj_model;
  double sif_a = 1e-3;
};

void add_encoder_opts(CLI::App* app, EncoderOpts& o) {
  app->add_option("--backend", o.backend, "embedding backend: avg, sif or proj")
      ->check(CLI::IsMember({"avg", "sif", "proj"}));
  app->add_option("--vectors", o.word_vectors, "word vector file")->required();
  app->add_option("--sif-model", o.sif_model, "fitted sif parameters (sif backend)");
  app->add_option("--proj-model", o.proj_model, "projection model (proj backend)");
  app->add_option("--sif-a", o.sif_a, "sif weighting constant");
}

Encoder make_encoder(const EncoderOpts& o) {
  auto table = std::make_shared<WordVectorTable>(WordVectorTable::load(o.word_vectors));
  auto backend = Encoder::parse_backend(o.backend);
  std::optional<SifParams> sif;
  std::optional<ProjectionEncoder> proj;
  if (backend == Encoder::Backend::sif) {
    if (o.sif_model.empty())
      throw std::runtime_error("sif backend needs --sif-model (fit one with `embed bank`)");
    sif = load_sif(o.sif_model, *table);
  }
  if (backend == Encoder::Backend::proj) {
    if (o.proj_model.empty()) throw std::runtime_error("proj backend needs --proj-model");
    proj = ProjectionEncoder::load(o.proj_model);
  }
  return Encoder(backend, std::move(table), std::move(sif), std::move(proj));
}

void write_hits_tsv(const std::string& path, const std::vector<std::vector<Hit>>& hits) {
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!path.empty()) {
    file.open(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write: " + path);
    out = &file;
  }
  char buf[64];
  for (std::size_t q = 0; q < hits.size(); ++q)
    for (std::size_t r = 0; r < hits[q].size(); ++r) {
      std::snprintf(buf, sizeof buf, "%zu\t%zu\t%llu\t%.6f\n", q, r + 1,
                    (unsigned long long)hits[q][r].id, hits[q][r].score);
      *out << buf;
    }
}

// ---------------------------------------------------------------------------
// Pipeline configuration

SynthTaskConfig synth_config_from(const Config& cfg) {
  SynthTaskConfig s;
  s.seed = cfg.get_u64("seed", 0);
  s.vocab_size = std::uint32_t(cfg.get_u64("synth_vocab_size", s.vocab_size));
  s.n_classes = int(cfg.get_int("synth_classes", s.n_classes));
  s.n_train = std::uint32_t(cfg.get_u64("synth_train", s.n_train));
  s.n_valid = std::uint32_t(cfg.get_u64("synth_valid", s.n_valid));
  s.n_test = std::uint32_t(cfg.get_u64("synth_test", s.n_test));
  s.bank_size = cfg.get_u64("synth_bank_size", s.bank_size);
  s.distractor_ratio = cfg.get_double("synth_distractor_ratio", s.distractor_ratio);
  s.overlap = cfg.get_double("synth_overlap", s.overlap);
  s.shared_vocab = std::uint32_t(cfg.get_u64("synth_shared_vocab", s.shared_vocab));
  s.n_distractor_topics = std::uint32_t(cfg.get_u64("synth_topics", s.n_distractor_topics));
  s.len_min = int(cfg.get_int("synth_len_min", s.len_min));
  s.len_max = int(cfg.get_int("synth_len_max", s.len_max));
  return s;
}

TaskContext context_from_config(const Config& cfg) {
  const std::string task = cfg.get_str("task", "synth");
  if (task == "synth") {
    auto scfg = synth_config_from(cfg);
    auto t = generate_synthetic_task(scfg);
    auto dim = std::uint32_t(cfg.get_u64("synth_dim", 64));
    auto table = std::make_shared<WordVectorTable>(
        synth_word_vectors(t.tokens, dim, scfg.seed));
    const std::string backend = cfg.get_str("backend", "avg");
    Encoder enc;
    if (backend == "avg") {
      enc = Encoder(Encoder::Backend::avg, table);
    } else if (backend == "sif") {
      table->estimate_unigram(t.bank_sentences);
      std::vector<std::vector<double>> sample;
      const double a = cfg.get_double("sif_a", 1e-3);
      const std::size_t want = std::size_t(cfg.get_u64("sif_sample", 20000));
      for (const auto& s : t.bank_sentences) {
        if (sample.size() >= want) break;
        if (auto raw = sif_raw_average(s, *table, a)) sample.push_back(std::move(*raw));
      }
      enc = Encoder(Encoder::Backend::sif, table, fit_sif(sample, a));
    } else {
      throw std::runtime_error("synthetic tasks support backend avg or sif, not " + backend);
    }
    return prepare_task_context(std::move(t.train), std::move(t.valid), std::move(t.test),
                                t.bank_sentences, std::move(enc));
  }
  if (task == "files") {
    EncoderOpts eo;
    eo.backend = cfg.get_str("backend", "avg");
    eo.word_vectors = cfg.get("word_vectors");
    eo.sif_model = cfg.get_str("sif_model", "");
    eo.proj_model = cfg.get_str("proj_model", "");
    auto train = LabeledDataset::load_tsv(cfg.get("train_tsv"));
    auto valid = cfg.has("valid_tsv") ? LabeledDataset::load_tsv(cfg.get("valid_tsv"))
                                      : LabeledDataset{};
    if (valid.examples.empty()) {
      valid.label_names = train.label_names;
      valid.label_ids = train.label_ids;
    }
    auto test = LabeledDataset::load_tsv(cfg.get("test_tsv"));
    auto bank_sentences = read_lines(cfg.get("bank_txt"));
    return prepare_task_context(std::move(train), std::move(valid), std::move(test),
                                bank_sentences, make_encoder(eo));
  }
  throw std::runtime_error("config: task must be 'synth' or 'files'");
}

ProtocolConfig protocol_config_from(const Config& cfg) {
  ProtocolConfig p;
  p.base_seed = cfg.get_u64("seed", 0);
  p.n_seeds = int(cfg.get_int("n_seeds", p.n_seeds));
  p.query_mode = parse_query_mode(cfg.get_str("query_mode", "label"));
  p.multiplier = cfg.get_u64("multiplier", 0);
  p.small_task_threshold = cfg.get_u64("small_task_threshold", p.small_task_threshold);
  p.allow_shortfall = cfg.get_bool("allow_shortfall", p.allow_shortfall);
  p.soft_labels = cfg.get_bool("soft_labels", p.soft_labels);
  p.teacher_hidden = parse_hidden(cfg.get_str("teacher_hidden", "256"));
  p.student_hidden = parse_hidden(cfg.get_str("student_hidden", "256"));
  p.teacher_epochs = int(cfg.get_int("teacher_epochs", p.teacher_epochs));
  p.student_epochs = int(cfg.get_int("student_epochs", p.student_epochs));
  p.learning_rate = cfg.get_double("learning_rate", p.learning_rate);
  p.batch_size = std::size_t(cfg.get_u64("batch_size", p.batch_size));
  p.pool_per_query = cfg.get_u64("pool_per_query", 0);
  p.index_threads = unsigned(cfg.get_u64("index_threads", 0));
  return p;
}

FewShotSpec few_shot_spec_from(const Config& cfg) {
  FewShotSpec f;
  f.base_seed = cfg.get_u64("seed", 0);
  f.n_per_class = std::uint32_t(cfg.get_u64("fs_per_class", f.n_per_class));
  f.n_train_sets = int(cfg.get_int("fs_train_sets", f.n_train_sets));
  f.n_valid = std::uint32_t(cfg.get_u64("fs_valid", f.n_valid));
  f.n_seeds = int(cfg.get_int("fs_seeds", f.n_seeds));
  f.top_models = int(cfg.get_int("fs_top_models", f.top_models));
  f.epochs = int(cfg.get_int("fs_epochs", f.epochs));
  f.pool_factor = cfg.get_u64("fs_pool_factor", f.pool_factor);
  f.augment_factor = cfg.get_u64("fs_augment_factor", f.augment_factor);
  f.discrete_labels = cfg.get_bool("fs_discrete", f.discrete_labels);
  f.include_ground_truth = cfg.get_bool("fs_ground_truth", f.include_ground_truth);
  f.hidden = parse_hidden(cfg.get_str("fs_hidden", "256"));
  f.learning_rate = cfg.get_double("learning_rate", f.learning_rate);
  f.batch_size = std::size_t(cfg.get_u64("batch_size", f.batch_size));
  f.index_threads = unsigned(cfg.get_u64("index_threads", 0));
  return f;
}

void emit_report(ExperimentReport& rep, const Config& cfg, const std::string& cli_report_path) {
  rep.config_snapshot = cfg.snapshot();
  std::string path = cli_report_path.empty() ? cfg.get_str("report_out", "") : cli_report_path;
  if (!path.empty()) {
    rep.save(path);
    std::cout << "report written to " << path << "\n";
  }
  std::cout << rep.summary_table();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-based data augmentation and teacher-student training"};
  app.require_subcommand(1);

  // ----- bank ------------------------------------------------------------
  auto* bank = app.add_subcommand("bank", "sentence bank construction");
  bank->require_subcommand(1);

  struct {
    std::vector<std::string> inputs;
    std::string out, test_file, bank_prefix, source;
    int min_tokens = 3, max_tokens = 100;
    bool raw_lines = false;
  } b;
  auto* bank_build = bank->add_subcommand("build", "segment, deduplicate and store sentences");
  bank_build->add_option("--input", b.inputs, "input text file(s) or directories")->required();
  bank_build->add_option("--out", b.out, "output path prefix")->required();
  bank_build->add_option("--min-tokens", b.min_tokens, "shortest sentence kept");
  bank_build->add_option("--max-tokens", b.max_tokens, "longest sentence kept");
  bank_build->add_option("--source", b.source, "free-form source description");
  bank_build->add_flag("--lines", b.raw_lines, "inputs are one sentence per line, skip segmentation");

  auto* bank_stats = bank->add_subcommand("dedup-stats", "count duplicates without writing");
  bank_stats->add_option("--input", b.inputs, "input text file(s)")->required();
  bank_stats->add_option("--min-tokens", b.min_tokens, "shortest sentence kept");
  bank_stats->add_option("--max-tokens", b.max_tokens, "longest sentence kept");
  bank_stats->add_flag("--lines", b.raw_lines, "inputs are one sentence per line");

  auto* bank_overlap = bank->add_subcommand("remove-overlap", "drop sentences found in a test set");
  bank_overlap->add_option("--bank", b.bank_prefix, "bank path prefix")->required();
  bank_overlap->add_option("--test", b.test_file, "test sentences, one per line")->required();
  bank_overlap->add_option("--out", b.out, "output path prefix")->required();

  // ----- embed ------------------------------------------------------------
  auto* embed = app.add_subcommand("embed", "sentence embedding");
  embed->require_subcommand(1);

  EncoderOpts embed_eo;
  struct {
    std::string bank_prefix, out, pairs, sif_out;
    bool quantized = false;
    double margin = 0.4;
    int epochs = 10;
    std::size_t batch = 32;
    double lr = 0.05;
    std::uint64_t seed = 0;
    std::uint32_t dim_out = 0;
    std::size_t sif_sample = 20000;
  } e;
  auto* embed_bank = embed->add_subcommand("bank", "embed every bank sentence");
  embed_bank->add_option("--bank", e.bank_prefix, "bank path prefix")->required();
  add_encoder_opts(embed_bank, embed_eo);
  embed_bank->add_option("--fit-sif", e.sif_out, "fit sif on the bank and write parameters here");
  embed_bank->add_option("--sif-sample", e.sif_sample, "bank sample size for the sif fit");
  embed_bank->add_flag("--quantized", e.quantized, "store int8 rows instead of float32");

  EncoderOpts proj_eo;
  auto* embed_proj = embed->add_subcommand("train-proj", "train the projection encoder");
  embed_proj->add_option("--pairs", e.pairs, "paraphrase pairs tsv")->required();
  embed_proj->add_option("--vectors", proj_eo.word_vectors, "word vector file")->required();
  embed_proj->add_option("--out", e.out, "output model path")->required();
  embed_proj->add_option("--margin", e.margin, "triplet margin");
  embed_proj->add_option("--epochs", e.epochs, "training epochs");
  embed_proj->add_option("--batch", e.batch, "batch size");
  embed_proj->add_option("--lr", e.lr, "learning rate");
  embed_proj->add_option("--seed", e.seed, "rng seed");
  embed_proj->add_option("--dim-out", e.dim_out, "output dimension (0: input dimension)");

  // ----- index ------------------------------------------------------------
  auto* index_cmd = app.add_subcommand("index", "similarity search");
  index_cmd->require_subcommand(1);
  struct {
    std::string bank_prefix, queries, out;
    std::size_t k = 10;
    bool quantized = false;
    unsigned threads = 0;
    std::size_t shard = std::size_t(1) << 16;
    int rescore = 10;
  } ix;
  auto* index_search = index_cmd->add_subcommand("search", "exact top-k cosine retrieval");
  index_search->add_option("--bank", ix.bank_prefix, "bank path prefix")->required();
  index_search->add_option("--queries", ix.queries, "query vector file")->required();
  index_search->add_option("--k", ix.k, "hits per query")->required();
  index_search->add_flag("--quantized", ix.quantized, "scan the int8 matrix");
  index_search->add_option("--out", ix.out, "output tsv (default stdout)");
  index_search->add_option("--threads", ix.threads, "scan threads (0: all cores)");
  index_search->add_option("--shard", ix.shard, "rows per shard");
  index_search->add_option("--rescore", ix.rescore, "rescore factor for int8 mode");

  // ----- query ------------------------------------------------------------
  auto* query = app.add_subcommand("query", "task query construction");
  query->require_subcommand(1);
  EncoderOpts query_eo;
  struct {
    std::string train, mode = "label", out;
  } q;
  auto* query_build = query->add_subcommand("build", "embed a training set into queries");
  query_build->add_option("--train", q.train, "labeled training tsv")->required();
  query_build->add_option("--mode", q.mode, "all, label or sent")
      ->check(CLI::IsMember({"all", "label", "sent"}));
  add_encoder_opts(query_build, query_eo);
  query_build->add_option("--out", q.out, "output vector file")->required();

  // ----- teacher / student ------------------------------------------------
  EncoderOpts teacher_eo, student_eo, eval_eo;
  struct {
    std::string train, out, model, sentences, synthetic, loss = "kl", hidden = "256";
    int epochs = 120;
    std::size_t batch = 32;
    double lr = 0.1;
    std::uint64_t seed = 0;
  } t;
  auto* teacher = app.add_subcommand("teacher", "train or apply the teacher");
  teacher->require_subcommand(1);
  auto* teacher_train = teacher->add_subcommand("train", "supervised training");
  teacher_train->add_option("--train", t.train, "labeled training tsv")->required();
  add_encoder_opts(teacher_train, teacher_eo);
  teacher_train->add_option("--out", t.out, "output model path")->required();
  teacher_train->add_option("--hidden", t.hidden, "hidden layer widths, comma separated");
  teacher_train->add_option("--epochs", t.epochs, "training epochs");
  teacher_train->add_option("--batch", t.batch, "batch size");
  teacher_train->add_option("--lr", t.lr, "learning rate");
  teacher_train->add_option("--seed", t.seed, "rng seed");

  auto* teacher_annot = teacher->add_subcommand("annotate", "soft-label a sentence file");
  teacher_annot->add_option("--model", t.model, "teacher model path")->required();
  teacher_annot->add_option("--sentences", t.sentences, "sentences, one per line")->required();
  add_encoder_opts(teacher_annot, teacher_eo);
  teacher_annot->add_option("--out", t.out, "output jsonl")->required();

  struct {
    std::string synthetic, out, loss = "kl", hidden;
    int epochs = 40;
    std::size_t batch = 32;
    double lr = 0.1;
    std::uint64_t seed = 0;
  } st;
  auto* student = app.add_subcommand("student", "train a student on synthetic data");
  student->require_subcommand(1);
  auto* student_train = student->add_subcommand("train", "fit to teacher annotations");
  student_train->add_option("--synthetic", st.synthetic, "annotated jsonl")->required();
  student_train->add_option("--loss", st.loss, "kl (soft) or ce (argmax)")
      ->check(CLI::IsMember({"kl", "ce"}));
  add_encoder_opts(student_train, student_eo);
  student_train->add_option("--out", st.out, "output model path")->required();
  student_train->add_option("--hidden", st.hidden, "hidden widths (empty: linear)");
  student_train->add_option("--epochs", st.epochs, "training epochs");
  student_train->add_option("--batch", st.batch, "batch size");
  student_train->add_option("--lr", st.lr, "learning rate");
  student_train->add_option("--seed", st.seed, "rng seed");

  // ----- augment ----------------------------------------------------------
  struct {
    std::string pool, train, out, multiplier = "auto";
    std::uint64_t threshold = 5000;
    bool strict = false;
  } au;
  auto* augment = app.add_subcommand("augment", "confidence filtering");
  augment->require_subcommand(1);
  auto* augment_filter = augment->add_subcommand("filter", "keep top candidates per class");
  augment_filter->add_option("--pool", au.pool, "annotated pool jsonl")->required();
  augment_filter->add_option("--train", au.train, "labeled training tsv")->required();
  augment_filter->add_option("--out", au.out, "output jsonl")->required();
  augment_filter->add_option("--multiplier", au.multiplier, "size multiplier or 'auto'");
  augment_filter->add_option("--threshold", au.threshold, "small-task threshold for auto");
  augment_filter->add_flag("--strict", au.strict, "fail on per-class shortfall");

  // ----- pipeline ---------------------------------------------------------
  struct {
    std::string config, report, source = "retrieved";
    std::string out_dir = ".";
    SynthTaskConfig synth;
    std::uint32_t dim = 64;
  } p;
  auto* pipeline = app.add_subcommand("pipeline", "end-to-end protocols");
  pipeline->require_subcommand(1);
  auto* pl_self = pipeline->add_subcommand("self-train", "teacher-student self-training");
  pl_self->add_option("--config", p.config, "key = value configuration")->required();
  pl_self->add_option("--report", p.report, "write the json report here");
  auto* pl_distill = pipeline->add_subcommand("distill", "distill into a smaller student");
  pl_distill->add_option("--config", p.config, "key = value configuration")->required();
  pl_distill->add_option("--report", p.report, "write the json report here");
  auto* pl_few = pipeline->add_subcommand("few-shot", "few-shot protocol");
  pl_few->add_option("--config", p.config, "key = value configuration")->required();
  pl_few->add_option("--report", p.report, "write the json report here");

  auto* pl_synth = pipeline->add_subcommand("synth-task", "write a generated task to disk");
  pl_synth->add_option("--seed", p.synth.seed, "task seed");
  pl_synth->add_option("--out-dir", p.out_dir, "output directory");
  pl_synth->add_option("--vocab-size", p.synth.vocab_size, "class vocabulary size");
  pl_synth->add_option("--classes", p.synth.n_classes, "number of classes");
  pl_synth->add_option("--train", p.synth.n_train, "training examples");
  pl_synth->add_option("--valid", p.synth.n_valid, "validation examples");
  pl_synth->add_option("--test", p.synth.n_test, "test examples");
  pl_synth->add_option("--bank-size", p.synth.bank_size, "bank sentences");
  pl_synth->add_option("--distractor-ratio", p.synth.distractor_ratio, "distractor fraction");
  pl_synth->add_option("--overlap", p.synth.overlap, "shared-vocabulary draw probability");
  pl_synth->add_option("--dim", p.dim, "word vector dimension");

  // ----- eval -------------------------------------------------------------
  struct {
    std::string pairs, model, test;
  } ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluation");
  eval_cmd->require_subcommand(1);
  auto* eval_sts_cmd = eval_cmd->add_subcommand("sts", "correlate cosine with gold scores");
  eval_sts_cmd->add_option("--pairs", ev.pairs, "s1<TAB>s2<TAB>gold tsv")->required();
  add_encoder_opts(eval_sts_cmd, eval_eo);
  auto* eval_acc = eval_cmd->add_subcommand("accuracy", "classification accuracy");
  eval_acc->add_option("--model", ev.model, "model path")->required();
  eval_acc->add_option("--test", ev.test, "labeled test tsv")->required();
  add_encoder_opts(eval_acc, eval_eo);

  CLI11_PARSE(app, argc, argv);

  try {
    // ----- bank -----
    if (*bank_build || *bank_stats) {
      SegmentConfig scfg{b.min_tokens, b.max_tokens};
      std::vector<std::string> files;
      for (const auto& input : b.inputs) {
        if (fs::is_directory(input)) {
          for (const auto& entry : fs::recursive_directory_iterator(input))
            if (entry.is_regular_file()) files.push_back(entry.path().string());
          std::sort(files.begin(), files.end());
        } else {
          files.push_back(input);
        }
      }
      std::vector<std::string> sentences;
      for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open: " + f);
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (b.raw_lines) {
            auto n = token_count(line);
            if (n >= std::size_t(scfg.min_tokens) && n <= std::size_t(scfg.max_tokens))
              sentences.push_back(line);
          } else {
            for (auto& s : segment(line, scfg)) sentences.push_back(std::move(s));
          }
        }
      }
      BuildStats stats;
      BankMeta meta;
      meta.source = b.source.empty() ? "cli" : b.source;
      SentenceBank built = build_bank(sentences, meta, &stats);
      std::printf("seen %llu  kept %llu  duplicates %llu\n", (unsigned long long)stats.seen,
                  (unsigned long long)stats.kept, (unsigned long long)stats.duplicates);
      if (*bank_build) {
        save_bank(built, b.out);
        std::printf("bank written to %s.{txt,off,meta.json}\n", b.out.c_str());
      }
    } else if (*bank_overlap) {
      SentenceBank loaded = load_bank(b.bank_prefix);
      auto result = remove_overlap(loaded, read_lines(b.test_file));
      save_bank(result.bank, b.out);
      std::printf("removed %llu overlapping sentences, %llu remain\n",
                  (unsigned long long)result.removed, (unsigned long long)result.bank.count());

      // ----- embed -----
    } else if (*embed_bank) {
      SentenceBank loaded = load_bank(e.bank_prefix, false);
      auto table = std::make_shared<WordVectorTable>(WordVectorTable::load(embed_eo.word_vectors));
      auto backend = Encoder::parse_backend(embed_eo.backend);
      std::optional<SifParams> sif;
      std::optional<ProjectionEncoder> proj;
      if (backend == Encoder::Backend::sif) {
        if (!e.sif_out.empty()) {
          std::vector<std::string> texts;
          texts.reserve(loaded.count());
          for (const auto& r : loaded.records) texts.push_back(r.text);
          table->estimate_unigram(texts);
          std::vector<std::vector<double>> sample;
          for (const auto& r : loaded.records) {
            if (sample.size() >= e.sif_sample) break;
            if (auto raw = sif_raw_average(r.text, *table, embed_eo.sif_a))
              sample.push_back(std::move(*raw));
          }
          sif = fit_sif(sample, embed_eo.sif_a);
          save_sif(*sif, *table, e.sif_out);
          std::printf("sif parameters written to %s\n", e.sif_out.c_str());
        } else if (!embed_eo.sif_model.empty()) {
          sif = load_sif(embed_eo.sif_model, *table);
        } else {
          throw std::runtime_error("sif backend needs --fit-sif or --sif-model");
        }
      }
      if (backend == Encoder::Backend::proj) {
        if (embed_eo.proj_model.empty()) throw std::runtime_error("proj backend needs --proj-model");
        proj = ProjectionEncoder::load(embed_eo.proj_model);
      }
      Encoder enc(backend, table, std::move(sif), std::move(proj));

      EmbeddingMatrix m = EmbeddingMatrix::zeros(enc.dim(), loaded.count(), Dtype::f32);
      std::uint64_t nulls = 0;
      for (std::uint64_t i = 0; i < loaded.count(); ++i) {
        auto v = enc.encode(loaded.records[i].text);
        if (v)
          m.set_row(i, *v);
        else
          ++nulls;
      }
      if (e.quantized) m = quantize(m);
      write_vectors(m, e.bank_prefix + ".vec");
      std::printf("embedded %llu sentences (%llu null) into %s.vec\n",
                  (unsigned long long)loaded.count(), (unsigned long long)nulls,
                  e.bank_prefix.c_str());
    } else if (*embed_proj) {
      auto table = WordVectorTable::load(proj_eo.word_vectors);
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& line : read_lines(e.pairs)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
          throw std::runtime_error("pairs file needs two tab-separated columns");
        pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
      }
      TripletConfig cfg;
      cfg.margin = e.margin;
      cfg.epochs = e.epochs;
      cfg.batch_size = e.batch;
      cfg.learning_rate = e.lr;
      cfg.seed = e.seed;
      auto result = train_projection(pairs, table, cfg, e.dim_out);
      result.encoder.save(e.out);
      std::printf("projection model written to %s (pairs used %zu, dropped %zu)\n", e.out.c_str(),
                  result.pairs_used, result.pairs_dropped);
      for (std::size_t i = 0; i < result.epoch_loss.size(); ++i)
        std::printf("epoch %zu mean loss %.6f\n", i + 1, result.epoch_loss[i]);

      // ----- index -----
    } else if (*index_search) {
      MappedVectors mv = MappedVectors::open(ix.bank_prefix + ".vec");
      if (ix.quantized && mv.dtype() != Dtype::i8)
        throw std::runtime_error("--quantized needs an int8 vector file (embed with --quantized)");
      EmbeddingMatrix queries = read_vectors(ix.queries);
      if (queries.dtype != Dtype::f32) throw std::runtime_error("queries must be float32");
      if (queries.dim != mv.dim()) throw std::runtime_error("query/bank dimension mismatch");
      std::vector<Vec> qs;
      for (std::uint64_t i = 0; i < queries.count; ++i) {
        if (queries.is_null(i)) continue;
        auto row = queries.row_f32(i);
        qs.emplace_back(row.begin(), row.end());
      }
      if (qs.empty()) throw std::runtime_error("no usable query rows");
      FlatIndex fi(MatrixViewRef::over(mv), ix.shard, ix.rescore, ix.threads);
      write_hits_tsv(ix.out, fi.top_k_multi(qs, ix.k));

      // ----- query -----
    } else if (*query_build) {
      auto data = LabeledDataset::load_tsv(q.train);
      auto enc = make_encoder(query_eo);
      auto qs = build_queries(data, parse_query_mode(q.mode), enc);
      EmbeddingMatrix m = EmbeddingMatrix::zeros(enc.dim(), qs.queries.size(), Dtype::f32);
      for (std::size_t i = 0; i < qs.queries.size(); ++i) m.set_row(i, qs.queries[i].vec);
      write_vectors(m, q.out);
      std::printf("%zu %s queries written to %s\n", qs.queries.size(), query_mode_name(qs.mode),
                  q.out.c_str());

      // ----- teacher -----
    } else if (*teacher_train) {
      auto data = LabeledDataset::load_tsv(t.train);
      auto enc = make_encoder(teacher_eo);
      std::vector<Vec> xs;
      std::vector<int> ys;
      for (const auto& ex : data.examples) {
        if (auto v = enc.encode(ex.text)) {
          xs.push_back(std::move(*v));
          ys.push_back(ex.label);
        }
      }
      TrainSpec spec;
      spec.loss = LossKind::cross_entropy;
      spec.epochs = t.epochs;
      spec.batch_size = t.batch;
      spec.learning_rate = t.lr;
      spec.seed = t.seed;
      auto result = train_classifier(enc.dim(), parse_hidden(t.hidden),
                                     std::uint32_t(data.num_classes()), xs, ys, {}, spec);
      result.model.save(t.out);
      std::printf("model written to %s (final loss %.6f, %zu examples)\n", t.out.c_str(),
                  result.final_loss, xs.size());
    } else if (*teacher_annot) {
      auto model = Classifier::load(t.model);
      auto enc = make_encoder(teacher_eo);
      auto sentences = read_lines(t.sentences);
      auto res = annotate(model, sentences, enc);
      write_synthetic(res.examples, t.out);
      std::printf("annotated %zu sentences (%zu dropped) into %s\n", res.examples.size(),
                  res.dropped, t.out.c_str());

      // ----- student -----
    } else if (*student_train) {
      auto pool = read_synthetic(st.synthetic);
      if (pool.empty()) throw std::runtime_error("synthetic file is empty");
      auto enc = make_encoder(student_eo);
      auto loss = parse_loss(st.loss);
      std::vector<Vec> xs;
      std::vector<int> ys;
      std::vector<SoftLabel> ts;
      std::size_t dropped = 0;
      std::uint32_t n_classes = std::uint32_t(pool.front().probs.size());
      for (const auto& ex : pool) {
        auto v = enc.encode(ex.text);
        if (!v) {
          ++dropped;
          continue;
        }
        xs.push_back(std::move(*v));
        if (loss == LossKind::kl)
          ts.push_back(ex.probs);
        else
          ys.push_back(ex.assigned_class);
      }
      TrainSpec spec;
      spec.loss = loss;
      spec.epochs = st.epochs;
      spec.batch_size = st.batch;
      spec.learning_rate = st.lr;
      spec.seed = st.seed;
      auto result =
          train_classifier(enc.dim(), parse_hidden(st.hidden), n_classes, xs, ys, ts, spec);
      result.model.save(st.out);
      std::printf("student written to %s (final loss %.6f, %zu examples, %zu dropped)\n",
                  st.out.c_str(), result.final_loss, xs.size(), dropped);

      // ----- augment -----
    } else if (*augment_filter) {
      auto pool = read_synthetic(au.pool);
      auto train_ds = LabeledDataset::load_tsv(au.train);
      AugmentConfig acfg;
      acfg.small_task_threshold = au.threshold;
      acfg.allow_shortfall = !au.strict;
      if (au.multiplier != "auto") acfg.multiplier = std::stoull(au.multiplier);
      const std::uint64_t mult = choose_multiplier(train_ds.size(), acfg);
      const std::uint64_t target = mult * train_ds.size();
      auto quotas = class_quotas(train_ds.label_counts(), target);
      std::vector<std::string> train_texts;
      for (const auto& ex : train_ds.examples) train_texts.push_back(ex.text);
      auto result = filter_synthetic(pool, quotas, train_texts, acfg.allow_shortfall);
      write_synthetic(result.selected, au.out);
      if (!result.shortfalls.empty()) {
        std::string j = "{\"shortfalls\": [";
        for (std::size_t i = 0; i < result.shortfalls.size(); ++i) {
          const auto& s = result.shortfalls[i];
          j += std::string(i ? ", " : "") + "{\"label\": " + std::to_string(s.label) +
               ", \"quota\": " + std::to_string(s.quota) +
               ", \"available\": " + std::to_string(s.available) + "}";
        }
        j += "]}";
        std::fprintf(stderr, "%s\n", j.c_str());
      }
      std::printf("kept %zu of %zu candidates (multiplier %llu, %llu excluded as train text)\n",
                  result.selected.size(), pool.size(), (unsigned long long)mult,
                  (unsigned long long)result.excluded_train_overlap);

      // ----- pipeline -----
    } else if (*pl_self || *pl_distill || *pl_few) {
      Config cfg = Config::load(p.config);
      TaskContext ctx = context_from_config(cfg);
      ExperimentReport rep;
      if (*pl_self) {
        rep = run_self_training(ctx, protocol_config_from(cfg));
      } else if (*pl_distill) {
        auto pcfg = protocol_config_from(cfg);
        if (!cfg.has("student_hidden")) pcfg.student_hidden.clear();  // default: linear student
        auto source = parse_unlabeled_source(cfg.get_str("source", "retrieved"));
        std::vector<std::string> gt_pool;
        if (source == UnlabeledSource::ground_truth_pool) {
          if (cfg.has("gt_pool_file")) {
            gt_pool = read_lines(cfg.get("gt_pool_file"));
          } else if (cfg.get_str("task", "synth") == "synth") {
            AugmentConfig acfg;
            acfg.multiplier = pcfg.multiplier;
            acfg.small_task_threshold = pcfg.small_task_threshold;
            const std::uint64_t target =
                choose_multiplier(ctx.train.size(), acfg) * ctx.train.size();
            gt_pool = generate_indomain_sentences(synth_config_from(cfg), 20 * target);
          } else {
            throw std::runtime_error("ground-truth source needs gt_pool_file");
          }
        }
        rep = run_distillation(ctx, pcfg, source, gt_pool.empty() ? nullptr : &gt_pool);
      } else {
        rep = run_few_shot(ctx, few_shot_spec_from(cfg));
      }
      emit_report(rep, cfg, p.report);
    } else if (*pl_synth) {
      auto task = generate_synthetic_task(p.synth);
      fs::create_directories(p.out_dir);
      auto base = fs::path(p.out_dir);
      task.train.save_tsv((base / "train.tsv").string());
      task.valid.save_tsv((base / "valid.tsv").string());
      task.test.save_tsv((base / "test.tsv").string());
      {
        std::ofstream out(base / "bank.txt", std::ios::binary | std::ios::trunc);
        for (const auto& s : task.bank_sentences) out << s << '\n';
        if (!out) throw std::runtime_error("cannot write bank.txt");
      }
      synth_word_vectors(task.tokens, p.dim, p.synth.seed)
          .save((base / "word_vectors.txt").string());
      std::printf("task written to %s (train %zu, valid %zu, test %zu, bank %zu)\n",
                  p.out_dir.c_str(), task.train.size(), task.valid.size(), task.test.size(),
                  task.bank_sentences.size());

      // ----- eval -----
    } else if (*eval_sts_cmd) {
      auto enc = make_encoder(eval_eo);
      auto res = eval_sts(enc, load_sts_pairs(ev.pairs));
      std::printf("pearson %.6f  spearman %.6f  (pairs used %zu, dropped %zu)\n", res.pearson,
                  res.spearman, res.used, res.dropped);
    } else if (*eval_acc) {
      auto model = Classifier::load(ev.model);
      auto enc = make_encoder(eval_eo);
      auto data = LabeledDataset::load_tsv(ev.test);
      auto res = eval_accuracy(model, data, enc);
      std::printf("accuracy %.6f  (%zu examples, %zu unembeddable)\n", res.accuracy,
                  res.evaluated, res.unembeddable);
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
