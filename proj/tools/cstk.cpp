// Pipeline driver: every stage is a subcommand, every run writes one manifest.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cstk/align.hpp"
#include "cstk/corpus.hpp"
#include "cstk/ecgen.hpp"
#include "cstk/errors.hpp"
#include "cstk/fusion.hpp"
#include "cstk/lm.hpp"
#include "cstk/metrics.hpp"
#include "cstk/pointer_gen.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cstk;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Per-subcommand option set merging a JSON config file with flags; flags win.
// The resolved union is what the manifest records.
struct OptSet {
  CLI::App* cmd = nullptr;
  std::string configPath;
  bool force = false;
  std::size_t threads = 1;
  std::string outDir;
  std::vector<std::function<void(const json&, json&)>> merges;

  explicit OptSet(CLI::App* c, bool needsOut = true) : cmd(c) {
    cmd->add_option("--config", configPath, "JSON config file; flags override its values");
    cmd->add_flag("--force", force, "overwrite an existing run directory");
    cmd->add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);
    auto* o = cmd->add_option("--out", outDir, "output directory");
    if (needsOut) o->required();
  }

  template <class T>
  void opt(const std::string& key, T& var, const std::string& desc, bool required = false) {
    CLI::Option* o = cmd->add_option("--" + key, var, desc);
    merges.push_back([key, &var, o](const json& file, json& out) {
      if (!o->count() && file.contains(key)) {
        try {
          var = file.at(key).get<T>();
        } catch (const json::exception&) {
          throw UsageError("config field \"" + key + "\" has the wrong type");
        }
      }
      out[key] = var;
    });
    if (required) {
      merges.push_back([key, o](const json& file, json&) {
        if (!o->count() && !file.contains(key))
          throw UsageError("missing required option --" + key);
      });
    }
  }

  // Applies the config file, returns the resolved config.
  json resolve() {
    json file = json::object();
    if (!configPath.empty()) {
      std::ifstream f(configPath);
      if (!f) throw UsageError("cannot open config file: " + configPath);
      try {
        f >> file;
      } catch (const json::exception& e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
      }
    }
    json resolved = json::object();
    for (auto& m : merges) m(file, resolved);
    resolved["threads"] = threads;
    return resolved;
  }

  fs::path prepare_out() {
    fs::path dir(outDir);
    if (fs::exists(dir / "manifest.json") && !force)
      throw UsageError("run directory already has a manifest: " + outDir +
                       " (use --force to overwrite)");
    fs::create_directories(dir);
    return dir;
  }

  void write_manifest(const fs::path& dir, const std::string& subcommand, const json& resolved) {
    json m;
    m["version"] = kVersion;
    m["timestamp"] = utc_now();
    m["subcommand"] = subcommand;
    m["config"] = resolved;
    std::ofstream f(dir / "manifest.json");
    f << m.dump(2) << "\n";
    if (!f) throw DataError("cannot write manifest in " + outDir);
  }
};

std::vector<std::string> read_lines_keep_empty(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
  if (!f) throw DataError("cannot write " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

json bucket_json(const lm::PerplexityReport& r) {
  json b = json::object();
  for (int k = 0; k < 4; ++k)
    b[lm::bucket_name(k)] = {{"ppl", r.buckets[k].ppl()}, {"tokens", r.buckets[k].tokenCount}};
  return {{"overall", r.overall}, {"tokenCount", r.tokenCount}, {"buckets", b}};
}

lm::LMConfig lm_config_from(std::size_t hidden, std::size_t unroll, double dropout, double lr,
                            double decay, double clip, std::size_t patience, double fineTuneLr,
                            std::size_t epochs, std::uint64_t seed) {
  lm::LMConfig cfg;
  cfg.hiddenSize = hidden;
  cfg.unrollSteps = unroll;
  cfg.dropoutRate = dropout;
  cfg.trainer = {lr, decay, clip, seed};
  cfg.earlyStopPatience = patience;
  cfg.fineTuneLr = fineTuneLr;
  cfg.maxEpochs = epochs;
  return cfg;
}

// ---- subcommand bodies ----

void cmd_tokenize(OptSet& o, const std::string& input) {
  json resolved = o.resolve();
  resolved["input"] = input;
  fs::path dir = o.prepare_out();
  std::string out;
  for (const std::string& line : read_lines_keep_empty(input)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      out += corpus::tokenize(line).joined();
    } else {
      out += corpus::tokenize(line.substr(0, tab)).joined();
      out += '\t';
      out += corpus::tokenize(line.substr(tab + 1)).joined();
    }
    out += '\n';
  }
  write_text(dir / "tokenized.txt", out);
  o.write_manifest(dir, "tokenize", resolved);
}

void cmd_align_train(OptSet& o, const std::string& parallel, std::size_t iterations,
                     double diagonalBias) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto pairs = corpus::read_parallel_file(parallel);
  const align::TranslationTable table = align::train_ibm1(pairs, iterations, diagonalBias);
  align::write_table_file((dir / "table.tsv").string(), table);
  write_json(dir / "report.json", {{"pairs", pairs.size()},
                                   {"iterations", iterations},
                                   {"logLikelihood", align::ibm1_log_likelihood(pairs, table)}});
  o.write_manifest(dir, "align-train", resolved);
}

void cmd_align(OptSet& o, const std::string& parallel, const std::string& tablePath) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto pairs = corpus::read_parallel_file(parallel);
  const align::TranslationTable table = align::read_table_file(tablePath);
  std::string out;
  for (const auto& p : pairs) out += align::to_pharaoh(align::viterbi_align(p, table)) + "\n";
  write_text(dir / "alignments.txt", out);
  o.write_manifest(dir, "align", resolved);
}

void cmd_ec_generate(OptSet& o, const std::string& parallel, const std::string& alignmentsPath,
                     const ecgen::EcGenConfig& cfg) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto pairs = corpus::read_parallel_file(parallel);
  const auto lines = read_lines_keep_empty(alignmentsPath);
  if (lines.size() != pairs.size())
    throw DataError("alignment file has " + std::to_string(lines.size()) + " lines for " +
                    std::to_string(pairs.size()) + " pairs");
  std::vector<align::SentenceAlignment> alignments;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    alignments.push_back(align::import_pharaoh(lines[k], pairs[k]));
  const auto generated = ecgen::generate_ec_corpus(pairs, alignments, cfg);
  corpus::write_corpus_file((dir / "generated.txt").string(), generated);
  write_json(dir / "report.json", {{"generatedSentences", generated.size()}});
  resolved["generatedSentences"] = generated.size();
  o.write_manifest(dir, "ec-generate", resolved);
}

void cmd_pg_train(OptSet& o, const std::string& parallel, const std::string& targetsPath,
                  pg::PointerGenConfig cfg) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto pairs = corpus::read_parallel_file(parallel);
  const auto targets = corpus::read_corpus_file(targetsPath);
  if (pairs.size() != targets.size())
    throw DataError("targets file has " + std::to_string(targets.size()) + " sentences for " +
                    std::to_string(pairs.size()) + " pairs");
  std::vector<corpus::Sentence> vocabInput;
  for (const auto& p : pairs) vocabInput.push_back(corpus::concat_pair(p));
  vocabInput.insert(vocabInput.end(), targets.begin(), targets.end());
  pg::PointerGenModel model =
      pg::make_pointer_gen(cfg, corpus::build_vocab(vocabInput, cfg.vocabCap));
  std::vector<pg::Example> examples;
  for (std::size_t k = 0; k < pairs.size(); ++k) examples.push_back({pairs[k], targets[k]});
  const pg::TrainResult res = pg::train(model, examples);
  pg::pg_save((dir / "model.bin").string(), model);
  write_json(dir / "report.json",
             {{"lossCurve", res.lossCurve}, {"learningRates", res.learningRates}});
  o.write_manifest(dir, "pg-train", resolved);
}

void cmd_pg_generate(OptSet& o, const std::string& modelPath, const std::string& parallel,
                     std::size_t beams, std::size_t nBest) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const pg::PointerGenModel model = pg::pg_load(modelPath);
  const auto pairs = corpus::read_parallel_file(parallel);
  std::string out;
  json rows = json::array();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto results = pg::beam_decode(model, pairs[k], beams, nBest);
    json nb = json::array();
    for (const auto& r : results) {
      if (!r.sentence.empty()) out += r.sentence.joined() + "\n";
      nb.push_back({{"text", r.sentence.joined()}, {"logScore", r.logScore}});
    }
    rows.push_back({{"pair", k}, {"nbest", nb}});
  }
  write_text(dir / "generated.txt", out);
  write_json(dir / "report.json", rows);
  o.write_manifest(dir, "pg-generate", resolved);
}

lm::Strategy parse_strategy(const std::string& s) {
  if (s == "real") return lm::Strategy::RealOnly;
  if (s == "gen") return lm::Strategy::GenOnly;
  if (s == "concat") return lm::Strategy::Concat;
  if (s == "twostep") return lm::Strategy::TwoStep;
  throw UsageError("unknown strategy \"" + s + "\" (expected real, gen, concat or twostep)");
}

void cmd_lm_train(OptSet& o, const std::string& trainPath, const std::string& validPath,
                  const std::string& generatedPath, const std::string& strategyName,
                  const lm::LMConfig& cfg, std::size_t vocabCap) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto real = corpus::read_corpus_file(trainPath);
  const auto valid = corpus::read_corpus_file(validPath);
  std::vector<corpus::Sentence> generated;
  const lm::Strategy strategy = parse_strategy(strategyName);
  if (!generatedPath.empty()) generated = corpus::read_corpus_file(generatedPath);
  std::vector<corpus::Sentence> vocabInput = real;
  vocabInput.insert(vocabInput.end(), generated.begin(), generated.end());
  lm::LMModel model = lm::make_lm(cfg, corpus::build_vocab(vocabInput, vocabCap));
  const lm::TrainResult res =
      lm::train_lm(model, real, generated.empty() ? nullptr : &generated, strategy, valid);
  lm::lm_save((dir / "model.bin").string(), model);
  write_json(dir / "report.json", {{"validPplHistory", res.validPplHistory},
                                   {"learningRates", res.learningRates},
                                   {"epochsRun", res.epochsRun}});
  o.write_manifest(dir, "lm-train", resolved);
}

void cmd_lm_eval(OptSet& o, const std::string& modelPath, const std::string& corpusPath) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const lm::LMModel model = lm::lm_load(modelPath);
  const auto corpus = corpus::read_corpus_file(corpusPath);
  const lm::PerplexityReport r = lm::eval_ppl(model, corpus);
  write_json(dir / "report.json", bucket_json(r));
  std::string csv = "overall,en-zh,zh-en,en-en,zh-zh,tokens\n";
  csv += fmt(r.overall) + "," + fmt(r.buckets[lm::EnZh].ppl()) + "," +
         fmt(r.buckets[lm::ZhEn].ppl()) + "," + fmt(r.buckets[lm::EnEn].ppl()) + "," +
         fmt(r.buckets[lm::ZhZh].ppl()) + "," + std::to_string(r.tokenCount) + "\n";
  write_text(dir / "report.csv", csv);
  o.write_manifest(dir, "lm-eval", resolved);
}

void cmd_strategy_matrix(OptSet& o, const std::string& realTrain, const std::string& validPath,
                         const std::string& testPath, const std::vector<std::string>& generated,
                         const lm::LMConfig& cfg, std::size_t vocabCap) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  lm::MatrixSplits splits;
  splits.realTrain = corpus::read_corpus_file(realTrain);
  splits.valid = corpus::read_corpus_file(validPath);
  splits.test = corpus::read_corpus_file(testPath);
  std::vector<std::pair<std::string, std::vector<corpus::Sentence>>> gen;
  for (const std::string& spec : generated) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw UsageError("--generated expects name=path, got \"" + spec + "\"");
    gen.emplace_back(spec.substr(0, eq), corpus::read_corpus_file(spec.substr(eq + 1)));
  }
  const auto rows = lm::run_strategy_matrix(splits, gen, cfg, vocabCap);
  json jrows = json::array();
  std::string csv = "strategy,split,overall,en-zh,zh-en,en-en,zh-zh\n";
  for (const auto& row : rows) {
    jrows.push_back(
        {{"strategy", row.strategy}, {"valid", bucket_json(row.valid)}, {"test", bucket_json(row.test)}});
    for (const auto* split : {"valid", "test"}) {
      const lm::PerplexityReport& r = std::string(split) == "valid" ? row.valid : row.test;
      csv += "\"" + row.strategy + "\"," + split + "," + fmt(r.overall) + "," +
             fmt(r.buckets[lm::EnZh].ppl()) + "," + fmt(r.buckets[lm::ZhEn].ppl()) + "," +
             fmt(r.buckets[lm::EnEn].ppl()) + "," + fmt(r.buckets[lm::ZhZh].ppl()) + "\n";
    }
  }
  write_json(dir / "report.json", jrows);
  write_text(dir / "report.csv", csv);
  o.write_manifest(dir, "strategy-matrix", resolved);
}

void cmd_metrics(OptSet& o, const std::string& corpusPath, const std::string& referencePath,
                 const std::string& cerReferencePath, int maxNgram) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const auto corp = corpus::read_corpus_file(corpusPath);
  json report;
  report["cmi"] = metrics::cmi_corpus(corp);
  report["spf"] = metrics::spf_corpus(corp);
  std::string csv = "metric,value\ncmi," + fmt(report["cmi"].get<double>()) + "\nspf," +
                    fmt(report["spf"].get<double>()) + "\n";
  if (!referencePath.empty()) {
    const auto ref = corpus::read_corpus_file(referencePath);
    json nov = json::array();
    for (int n = 1; n <= maxNgram; ++n) {
      const metrics::NgramNoveltyRow row = metrics::ngram_novelty(corp, ref, n);
      nov.push_back({{"n", row.n},
                     {"new", row.newCount},
                     {"refUnique", row.refUniqueCount},
                     {"ratio", row.ratio}});
      csv += "novelty-" + std::to_string(n) + "," + fmt(row.ratio) + "\n";
    }
    report["novelty"] = nov;
  }
  if (!cerReferencePath.empty()) {
    const auto ref = corpus::read_corpus_file(cerReferencePath);
    if (ref.size() != corp.size())
      throw DataError("cer reference has " + std::to_string(ref.size()) + " sentences for " +
                      std::to_string(corp.size()));
    double sum = 0.0;
    for (std::size_t k = 0; k < corp.size(); ++k)
      sum += metrics::cer(metrics::cer_chars(ref[k]), metrics::cer_chars(corp[k]));
    report["cer"] = corp.empty() ? 0.0 : sum / static_cast<double>(corp.size());
    csv += "cer," + fmt(report["cer"].get<double>()) + "\n";
  }
  write_json(dir / "report.json", report);
  write_text(dir / "report.csv", csv);
  o.write_manifest(dir, "metrics", resolved);
}

void cmd_fuse_decode(OptSet& o, const std::string& emissionsPath, const std::string& lmPath,
                     const fusion::FusionConfig& cfg) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const fusion::EmissionSequence emissions = fusion::read_emissions(emissionsPath);
  const lm::LMModel model = lm::lm_load(lmPath);
  const auto hyps = fusion::fused_beam_decode(emissions, model, cfg);
  json rows = json::array();
  for (const auto& h : hyps)
    rows.push_back({{"text", h.surface(emissions)},
                    {"words", h.words(emissions)},
                    {"transScore", h.transScore},
                    {"lmScore", h.lmScore},
                    {"wordCount", h.wordCount},
                    {"fusedScore", h.fusedScore}});
  json report = {{"wordBoundaryPolicy", "space-delimited; CJK characters are words"},
                 {"hypotheses", rows}};
  write_json(dir / "report.json", report);
  write_text(dir / "best.txt", hyps.empty() ? "" : hyps[0].surface(emissions) + "\n");
  o.write_manifest(dir, "fuse-decode", resolved);
}

void cmd_trace_export(OptSet& o, const std::string& modelPath, const std::string& parallel) {
  json resolved = o.resolve();
  fs::path dir = o.prepare_out();
  const pg::PointerGenModel model = pg::pg_load(modelPath);
  const auto pairs = corpus::read_parallel_file(parallel);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const pg::DecodeResult r = pg::greedy_decode(model, pairs[k]);
    write_text(dir / ("trace_" + std::to_string(k) + ".csv"), pg::export_trace(r.trace));
  }
  write_json(dir / "report.json", {{"pairs", pairs.size()}});
  o.write_manifest(dir, "trace-export", resolved);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"code-switching generation and evaluation toolkit"};
  app.require_subcommand(1);
  std::vector<std::function<void()>> runners;

  // tokenize
  auto* cTok = app.add_subcommand("tokenize", "tokenize raw text (tab-separated pairs allowed)");
  auto oTok = std::make_shared<OptSet>(cTok);
  auto tokInput = std::make_shared<std::string>();
  oTok->opt("input", *tokInput, "raw text file", true);
  cTok->callback([oTok, tokInput] { cmd_tokenize(*oTok, *tokInput); });

  // align-train
  auto* cAt = app.add_subcommand("align-train", "estimate lexical translation table by EM");
  auto oAt = std::make_shared<OptSet>(cAt);
  auto atParallel = std::make_shared<std::string>();
  auto atIters = std::make_shared<std::size_t>(10);
  auto atBias = std::make_shared<double>(0.0);
  oAt->opt("parallel", *atParallel, "tab-separated parallel corpus", true);
  oAt->opt("iterations", *atIters, "EM iterations");
  oAt->opt("diagonal-bias", *atBias, "diagonal alignment bias strength");
  cAt->callback([oAt, atParallel, atIters, atBias] {
    cmd_align_train(*oAt, *atParallel, *atIters, *atBias);
  });

  // align
  auto* cAl = app.add_subcommand("align", "best-link alignment of a parallel corpus");
  auto oAl = std::make_shared<OptSet>(cAl);
  auto alParallel = std::make_shared<std::string>();
  auto alTable = std::make_shared<std::string>();
  oAl->opt("parallel", *alParallel, "tab-separated parallel corpus", true);
  oAl->opt("table", *alTable, "translation table file", true);
  cAl->callback([oAl, alParallel, alTable] { cmd_align(*oAl, *alParallel, *alTable); });

  // ec-generate
  auto* cEc = app.add_subcommand("ec-generate", "substitution under the equivalence constraint");
  auto oEc = std::make_shared<OptSet>(cEc);
  auto ecParallel = std::make_shared<std::string>();
  auto ecAlign = std::make_shared<std::string>();
  auto ecCfg = std::make_shared<ecgen::EcGenConfig>();
  oEc->opt("parallel", *ecParallel, "tab-separated parallel corpus", true);
  oEc->opt("alignments", *ecAlign, "alignment file, one i-j line per pair", true);
  oEc->opt("max-switches", ecCfg->maxSwitches, "maximum switched spans per sentence");
  oEc->opt("samples-per-pair", ecCfg->samplesPerPair, "distinct outputs per pair");
  oEc->opt("seed", ecCfg->rngSeed, "random seed");
  cEc->callback([oEc, ecParallel, ecAlign, ecCfg] {
    cmd_ec_generate(*oEc, *ecParallel, *ecAlign, *ecCfg);
  });

  // pg-train
  auto* cPt = app.add_subcommand("pg-train", "train the copy-network generator");
  auto oPt = std::make_shared<OptSet>(cPt);
  auto ptParallel = std::make_shared<std::string>();
  auto ptTargets = std::make_shared<std::string>();
  auto ptCfg = std::make_shared<pg::PointerGenConfig>();
  oPt->opt("parallel", *ptParallel, "tab-separated parallel corpus", true);
  oPt->opt("targets", *ptTargets, "target sentences, line-aligned with pairs", true);
  oPt->opt("hidden", ptCfg->hiddenSize, "hidden size");
  oPt->opt("embed", ptCfg->embedSize, "embedding size");
  oPt->opt("vocab-cap", ptCfg->vocabCap, "vocabulary cap");
  oPt->opt("max-decode-len", ptCfg->maxDecodeLen, "decode length limit");
  oPt->opt("epochs", ptCfg->maxEpochs, "training epochs");
  oPt->opt("lr", ptCfg->trainer.learningRate, "learning rate");
  oPt->opt("decay", ptCfg->trainer.decayFactor, "learning-rate decay factor");
  oPt->opt("clip", ptCfg->trainer.clipNorm, "gradient clip norm");
  oPt->opt("seed", ptCfg->trainer.rngSeed, "random seed");
  cPt->callback([oPt, ptParallel, ptTargets, ptCfg] {
    cmd_pg_train(*oPt, *ptParallel, *ptTargets, *ptCfg);
  });

  // pg-generate
  auto* cPg = app.add_subcommand("pg-generate", "beam-decode the copy network");
  auto oPg = std::make_shared<OptSet>(cPg);
  auto pgModel = std::make_shared<std::string>();
  auto pgParallel = std::make_shared<std::string>();
  auto pgBeams = std::make_shared<std::size_t>(5);
  auto pgNBest = std::make_shared<std::size_t>(3);
  oPg->opt("model", *pgModel, "trained model checkpoint", true);
  oPg->opt("parallel", *pgParallel, "tab-separated parallel corpus", true);
  oPg->opt("beams", *pgBeams, "beam width");
  oPg->opt("nbest", *pgNBest, "hypotheses kept per pair");
  cPg->callback([oPg, pgModel, pgParallel, pgBeams, pgNBest] {
    cmd_pg_generate(*oPg, *pgModel, *pgParallel, *pgBeams, *pgNBest);
  });

  // lm-train
  auto* cLt = app.add_subcommand("lm-train", "train the language model");
  auto oLt = std::make_shared<OptSet>(cLt);
  struct LtArgs {
    std::string train, valid, generated, strategy = "real";
    std::size_t hidden = 200, unroll = 35, patience = 5, epochs = 100, vocabCap = 10000;
    double dropout = 0.2, lr = 20.0, decay = 0.75, clip = 0.25, fineTuneLr = 1.0;
    std::uint64_t seed = 1;
  };
  auto lt = std::make_shared<LtArgs>();
  oLt->opt("train", lt->train, "training corpus", true);
  oLt->opt("valid", lt->valid, "validation corpus", true);
  oLt->opt("generated", lt->generated, "generated corpus (gen/concat/twostep strategies)");
  oLt->opt("strategy", lt->strategy, "real | gen | concat | twostep");
  oLt->opt("hidden", lt->hidden, "hidden size (embedding tied)");
  oLt->opt("unroll", lt->unroll, "truncated backprop window");
  oLt->opt("dropout", lt->dropout, "dropout rate");
  oLt->opt("lr", lt->lr, "learning rate");
  oLt->opt("decay", lt->decay, "plateau decay factor");
  oLt->opt("clip", lt->clip, "gradient clip norm");
  oLt->opt("patience", lt->patience, "early-stop patience");
  oLt->opt("fine-tune-lr", lt->fineTuneLr, "second-phase learning rate");
  oLt->opt("epochs", lt->epochs, "maximum epochs per phase");
  oLt->opt("vocab-cap", lt->vocabCap, "vocabulary cap");
  oLt->opt("seed", lt->seed, "random seed");
  cLt->callback([oLt, lt] {
    cmd_lm_train(*oLt, lt->train, lt->valid, lt->generated, lt->strategy,
                 lm_config_from(lt->hidden, lt->unroll, lt->dropout, lt->lr, lt->decay, lt->clip,
                                lt->patience, lt->fineTuneLr, lt->epochs, lt->seed),
                 lt->vocabCap);
  });

  // lm-eval
  auto* cLe = app.add_subcommand("lm-eval", "bucketed perplexity of a corpus");
  auto oLe = std::make_shared<OptSet>(cLe);
  auto leModel = std::make_shared<std::string>();
  auto leCorpus = std::make_shared<std::string>();
  oLe->opt("model", *leModel, "trained model checkpoint", true);
  oLe->opt("corpus", *leCorpus, "evaluation corpus", true);
  cLe->callback([oLe, leModel, leCorpus] { cmd_lm_eval(*oLe, *leModel, *leCorpus); });

  // strategy-matrix
  auto* cSm = app.add_subcommand("strategy-matrix", "train/eval every data strategy");
  auto oSm = std::make_shared<OptSet>(cSm);
  struct SmArgs {
    std::string realTrain, valid, test;
    std::vector<std::string> generated;
    std::size_t hidden = 200, unroll = 35, patience = 5, epochs = 100, vocabCap = 10000;
    double dropout = 0.2, lr = 20.0, decay = 0.75, clip = 0.25, fineTuneLr = 1.0;
    std::uint64_t seed = 1;
  };
  auto sm = std::make_shared<SmArgs>();
  oSm->opt("real-train", sm->realTrain, "real training corpus", true);
  oSm->opt("valid", sm->valid, "validation corpus", true);
  oSm->opt("test", sm->test, "test corpus", true);
  oSm->opt("generated", sm->generated, "name=path, repeatable");
  oSm->opt("hidden", sm->hidden, "hidden size");
  oSm->opt("unroll", sm->unroll, "truncated backprop window");
  oSm->opt("dropout", sm->dropout, "dropout rate");
  oSm->opt("lr", sm->lr, "learning rate");
  oSm->opt("decay", sm->decay, "plateau decay factor");
  oSm->opt("clip", sm->clip, "gradient clip norm");
  oSm->opt("patience", sm->patience, "early-stop patience");
  oSm->opt("fine-tune-lr", sm->fineTuneLr, "second-phase learning rate");
  oSm->opt("epochs", sm->epochs, "maximum epochs per phase");
  oSm->opt("vocab-cap", sm->vocabCap, "vocabulary cap");
  oSm->opt("seed", sm->seed, "random seed");
  cSm->callback([oSm, sm] {
    cmd_strategy_matrix(*oSm, sm->realTrain, sm->valid, sm->test, sm->generated,
                        lm_config_from(sm->hidden, sm->unroll, sm->dropout, sm->lr, sm->decay,
                                       sm->clip, sm->patience, sm->fineTuneLr, sm->epochs,
                                       sm->seed),
                        sm->vocabCap);
  });

  // metrics
  auto* cMe = app.add_subcommand("metrics", "mixing metrics of a corpus");
  auto oMe = std::make_shared<OptSet>(cMe);
  struct MeArgs {
    std::string corpus, reference, cerReference;
    int maxNgram = 4;
  };
  auto me = std::make_shared<MeArgs>();
  oMe->opt("corpus", me->corpus, "corpus to score", true);
  oMe->opt("reference", me->reference, "reference corpus for n-gram novelty");
  oMe->opt("cer-reference", me->cerReference, "line-aligned reference for character error rate");
  oMe->opt("max-ngram", me->maxNgram, "highest novelty order");
  cMe->callback([oMe, me] {
    cmd_metrics(*oMe, me->corpus, me->reference, me->cerReference, me->maxNgram);
  });

  // fuse-decode
  auto* cFd = app.add_subcommand("fuse-decode", "beam decode emissions with LM fusion");
  auto oFd = std::make_shared<OptSet>(cFd);
  auto fdEmissions = std::make_shared<std::string>();
  auto fdLm = std::make_shared<std::string>();
  auto fdCfg = std::make_shared<fusion::FusionConfig>();
  oFd->opt("emissions", *fdEmissions, "emission file", true);
  oFd->opt("lm", *fdLm, "language model checkpoint", true);
  oFd->opt("alpha", fdCfg->alpha, "emission weight");
  oFd->opt("beta", fdCfg->beta, "language model weight");
  oFd->opt("gamma", fdCfg->gamma, "word-count bonus weight");
  oFd->opt("beams", fdCfg->beams, "beam width");
  oFd->opt("nbest", fdCfg->nBest, "hypotheses reported");
  cFd->callback([oFd, fdEmissions, fdLm, fdCfg] {
    cmd_fuse_decode(*oFd, *fdEmissions, *fdLm, *fdCfg);
  });

  // trace-export
  auto* cTe = app.add_subcommand("trace-export", "attention heatmaps as CSV");
  auto oTe = std::make_shared<OptSet>(cTe);
  auto teModel = std::make_shared<std::string>();
  auto teParallel = std::make_shared<std::string>();
  oTe->opt("model", *teModel, "trained copy-network checkpoint", true);
  oTe->opt("parallel", *teParallel, "tab-separated parallel corpus", true);
  cTe->callback([oTe, teModel, teParallel] { cmd_trace_export(*oTe, *teModel, *teParallel); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
