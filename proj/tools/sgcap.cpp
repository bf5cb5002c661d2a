// sgcap: command-line entry points for bank construction, synthetic data,
// training, caption generation, evaluation and embedding-variance analysis.
//
// Exit codes: 0 success, 1 usage error, 2 data-format error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"
#include "sgcap/corpus.hpp"
#include "sgcap/error.hpp"
#include "sgcap/inference.hpp"
#include "sgcap/metrics.hpp"
#include "sgcap/model.hpp"
#include "sgcap/synth.hpp"
#include "sgcap/training.hpp"

namespace fs = std::filesystem;
using namespace sgcap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFormat = 2;
constexpr int kExitNumerical = 3;

// Splices "--key=value" pairs from a --config file in right after the
// subcommand name, so options given on the command line (which come later
// and use take-last semantics) override them.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_key_values(*path)) {
    if (key == "config") throw ConfigError("--config files cannot nest");
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str().empty() ? "-" : opt->get_default_str();
  const auto& res = opt->results();
  return res.empty() ? "true" : res.back();
}

// One-line resolved configuration; always the first line of output.
void echo_config(const CLI::App* sub) {
  std::string line = "# sgcap " + sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help") continue;
    line += " " + opt->get_name().substr(2) + "=" + option_value(opt);
  }
  std::cout << line << '\n';
}

std::vector<fs::path> frame_files(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".sgcf") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw FormatError("no .sgcf files in " + p.string());
  return out;
}

struct Options {
  // build-bank
  std::string input, output;
  bool heuristic_tags = false;
  // synth-corpus
  std::string templates;
  std::size_t size = 500, dim = 32, frames_per_video = 8;
  SynthConfig synth;
  // shared
  std::uint64_t seed = 42;
  std::string bank_path, model_path, frames_path, log_path;
  // train
  TrainConfig train;
  std::string noise = "element_wise", loss = "mixture";
  bool fixed_noise = false, keep_self = false;
  // infer
  GenerateConfig gen;
  // eval
  std::string candidates, references;
  // analyze-variance
  double gamma = 0.9;
};

int run_build_bank(const Options& o) {
  auto bank = build_bank(read_corpus(o.input, o.heuristic_tags));
  save_bank(bank, o.output);
  // Re-read to validate what was written.
  if (!(load_bank(o.output) == bank)) throw FormatError("bank round-trip check failed for " + o.output);
  std::cout << "bank sentences=" << bank.size() << " dim=" << bank.dim() << " path=" << o.output << '\n';
  return 0;
}

int run_synth(const Options& o) {
  SynthConfig cfg;
  cfg.size = o.size;
  cfg.dim = o.dim;
  cfg.seed = o.seed;
  cfg.frames_per_video = o.frames_per_video;
  cfg.sentence_noise = o.synth.sentence_noise;
  cfg.frame_noise = o.synth.frame_noise;
  cfg.modality_gap = o.synth.modality_gap;
  const auto templates = o.templates.empty() ? SynthTemplates::builtin() : SynthTemplates::load(o.templates);
  const auto corpus = synthesize_corpus(templates, cfg);
  write_synth_corpus(corpus, o.output);
  std::cout << "records=" << corpus.records.size() << " videos=" << corpus.videos.size()
            << " dim=" << cfg.dim << " dir=" << o.output << '\n';
  return 0;
}

int run_train(Options o) {
  o.train.noise = parse_noise_mode(o.noise);
  o.train.loss = parse_loss_mode(o.loss);
  o.train.redraw_noise = !o.fixed_noise;
  o.train.exclude_self = !o.keep_self;
  o.train.seed = o.seed;
  const auto bank = load_bank(o.bank_path);

  std::ofstream log_file;
  if (!o.log_path.empty()) {
    log_file.open(o.log_path);
    if (!log_file) throw FormatError("cannot write log " + o.log_path);
  }
  std::ostream& log = o.log_path.empty() ? std::cout : log_file;
  auto result = train(bank, o.train, [&](const TrainLogRecord& r) { log << format_log_record(r) << '\n'; });
  save_checkpoint(result.params, result.vocab, o.output);
  std::printf("trained epochs=%zu initial_loss=%.6f final_loss=%.6f params=%zu vocab=%zu path=%s\n",
              result.epochs_run, result.initial_loss, result.final_loss, result.params.parameter_count(),
              result.vocab.size(), o.output.c_str());
  return 0;
}

int run_infer(const Options& o) {
  const auto bank = load_bank(o.bank_path);
  const auto ckpt = load_checkpoint(o.model_path);
  if (ckpt.params.config().dim != bank.dim())
    throw ConfigError("model dim " + std::to_string(ckpt.params.config().dim) + " does not match bank dim " +
                      std::to_string(bank.dim()));

  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw FormatError("cannot write " + o.output);
  }
  std::ostream& out = o.output.empty() ? std::cout : file;
  for (const auto& path : frame_files(o.frames_path)) {
    const auto frames = load_frames(path);
    const auto hyps = generate(frames, bank, ckpt.params, o.gen);
    const auto& best = hyps.front();
    char score[32];
    std::snprintf(score, sizeof score, "%.6f", best.normalized_score());
    out << frames.video_id << '\t' << ckpt.vocab.decode(best.tokens) << '\t' << score
        << (best.finished ? "" : "\tunfinished") << '\n';
  }
  return 0;
}

int run_eval(const Options& o) {
  std::map<std::string, std::string> cands;
  for (auto& [id, text] : read_id_text(o.candidates)) cands[id] = text;
  std::multimap<std::string, std::string> refs;
  for (auto& [id, text] : read_id_text(o.references)) refs.emplace(id, text);
  const auto pairs = join_by_id(cands, refs);
  const auto r = evaluate_all(pairs);
  std::printf("pairs=%zu\n", pairs.size());
  for (int n = 0; n < 4; ++n) std::printf("BLEU-%d\t%.6f\n", n + 1, r.bleu[n]);
  std::printf("ROUGE-L\t%.6f\nCIDEr-D\t%.6f\n", r.rouge_l, r.cider_d);
  return 0;
}

int run_variance(const Options& o) {
  const auto bank = load_bank(o.bank_path);
  const auto stats = compute_stats(bank);
  const auto de = effective_dimension(stats, o.gamma);
  double total = 0.0;
  for (double v : stats.variance) total += v;
  std::printf("effective_dimension=%zu gamma=%.6g dim=%zu total_variance=%.9g mean_stddev=%.9g\n", de, o.gamma,
              bank.dim(), total, stats.mean_stddev());
  std::printf("dim\tvariance\tstddev\teigenvalue\n");
  for (std::size_t j = 0; j < bank.dim(); ++j)
    std::printf("%zu\t%.9g\t%.9g\t%.9g\n", j, stats.variance[j], std::sqrt(stats.variance[j]),
                stats.covariance_eigenvalues[j]);
  return 0;
}

int run_validate(const Options& o) {
  if (!o.bank_path.empty()) {
    const auto bank = load_bank(o.bank_path);
    std::cout << "ok bank sentences=" << bank.size() << " dim=" << bank.dim() << '\n';
  }
  if (!o.frames_path.empty()) {
    for (const auto& p : frame_files(o.frames_path)) {
      const auto f = load_frames(p);
      std::cout << "ok frames id=" << f.video_id << " frames=" << f.size() << " dim=" << f.dim << '\n';
    }
  }
  if (!o.model_path.empty()) {
    const auto c = load_checkpoint(o.model_path);
    std::cout << "ok model params=" << c.params.parameter_count() << " vocab=" << c.vocab.size() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sgcap: semantic-group video captioning trained from text only"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  Options o;
  if (const char* env = std::getenv("SGCAP_SEED")) {
    try {
      o.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: SGCAP_SEED is not an unsigned integer\n";
      return kExitUsage;
    }
  }
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Key-value file of option defaults");
  };

  auto* build = app.add_subcommand("build-bank", "Build an SGCB bank from a corpus file");
  add_common(build);
  build->add_option("--input", o.input, "Corpus file (text<TAB>tokens<TAB>embedding)")->required();
  build->add_option("--output", o.output, "Output SGCB file")->required();
  build->add_flag("--heuristic-tags", o.heuristic_tags, "Derive content tokens by stopword removal");

  auto* synth = app.add_subcommand("synth-corpus", "Generate a synthetic corpus and frame files");
  add_common(synth);
  synth->add_option("--templates", o.templates, "Template file (default: built-in)");
  synth->add_option("--size", o.size, "Number of sentences/videos")->check(CLI::PositiveNumber);
  synth->add_option("--dim", o.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  synth->add_option("--frames", o.frames_per_video, "Frames per video")->check(CLI::PositiveNumber);
  synth->add_option("--sentence-noise", o.synth.sentence_noise, "Per-sentence jitter around the event latent");
  synth->add_option("--frame-noise", o.synth.frame_noise, "Per-frame jitter");
  synth->add_option("--modality-gap", o.synth.modality_gap, "Offset between frame and text centres");
  synth->add_option("--seed", o.seed, "Random seed (fallback: SGCAP_SEED)");
  synth->add_option("--output", o.output, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train fusion module and decoder on a sentence bank");
  add_common(tr);
  tr->add_option("--bank", o.bank_path, "SGCB bank")->required();
  tr->add_option("--output", o.output, "Output SGCM checkpoint")->required();
  tr->add_option("--log", o.log_path, "Training log file (default: stdout)");
  tr->add_option("--sigma", o.train.sigma, "Cosine weight in the hybrid retrieval score");
  tr->add_option("--lambda", o.train.lambda, "Raw supervision score of the training caption");
  tr->add_option("--k", o.train.k, "Semantic group size");
  tr->add_option("--noise", o.noise, "none|standard|scalar|element_wise");
  tr->add_option("--loss", o.loss, "mixture|sampled");
  tr->add_option("--lr", o.train.optimizer.lr, "AdamW learning rate");
  tr->add_option("--weight-decay", o.train.optimizer.weight_decay, "AdamW decoupled weight decay");
  tr->add_option("--batch-size", o.train.batch_size, "Captions per optimizer step");
  tr->add_option("--epochs", o.train.max_epochs, "Maximum epochs");
  tr->add_option("--patience", o.train.early_stop_patience, "Early-stopping patience in epochs (0: off)");
  tr->add_option("--heldout-fraction", o.train.heldout_fraction, "Bank fraction held out for early stopping");
  tr->add_option("--grad-clip", o.train.grad_clip, "Global gradient-norm clip (0: off)");
  tr->add_option("--seed", o.seed, "Random seed (fallback: SGCAP_SEED)");
  tr->add_option("--heads", o.train.heads, "Attention heads");
  tr->add_option("--layers", o.train.layers, "Decoder blocks");
  tr->add_option("--ffn-dim", o.train.ffn_dim, "Decoder feed-forward width");
  tr->add_option("--fusion-ffn-dim", o.train.fusion_ffn_dim, "Fusion feed-forward width");
  tr->add_flag("--fusion-positions", o.train.fusion_positions, "Learned slot positions in the fusion module");
  tr->add_option("--max-len", o.train.max_len, "Maximum caption length in tokens, EOS included");
  tr->add_option("--min-count", o.train.min_word_count, "Vocabulary frequency cutoff");
  tr->add_flag("--fixed-noise", o.fixed_noise, "Draw group noise once per caption instead of per epoch");
  tr->add_flag("--keep-self", o.keep_self, "Allow a caption to retrieve itself into its group");

  auto* inf = app.add_subcommand("infer", "Caption videos from SGCF frame files");
  add_common(inf);
  inf->add_option("--bank", o.bank_path, "SGCB bank used for domain transfer")->required();
  inf->add_option("--model", o.model_path, "SGCM checkpoint")->required();
  inf->add_option("--frames", o.frames_path, "SGCF file or directory")->required();
  inf->add_option("--output", o.output, "Output file (default: stdout)");
  inf->add_option("--k", o.gen.k, "Sampled frames per video");
  inf->add_option("--tau", o.gen.tau, "Domain-transfer softmax temperature");
  inf->add_option("--beam", o.gen.beam_size, "Beam size")->check(CLI::PositiveNumber);
  inf->add_option("--max-len", o.gen.max_len, "Maximum generated tokens")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "Score captions with BLEU, ROUGE-L and CIDEr-D");
  add_common(ev);
  ev->add_option("--candidates", o.candidates, "id<TAB>caption file (later columns, such as infer scores, are ignored)")->required();
  ev->add_option("--references", o.references, "id<TAB>reference file (repeat ids for several)")->required();

  auto* var = app.add_subcommand("analyze-variance", "Per-dimension variance and effective dimension");
  add_common(var);
  var->add_option("--bank", o.bank_path, "SGCB bank")->required();
  var->add_option("--gamma", o.gamma, "Explained-variance threshold in (0, 1]");

  auto* val = app.add_subcommand("validate", "Check SGCB, SGCF or SGCM files");
  add_common(val);
  val->add_option("--bank", o.bank_path, "SGCB bank");
  val->add_option("--frames", o.frames_path, "SGCF file or directory");
  val->add_option("--model", o.model_path, "SGCM checkpoint");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    echo_config(sub);
    const std::string name = sub->get_name();
    if (name == "build-bank") return run_build_bank(o);
    if (name == "synth-corpus") return run_synth(o);
    if (name == "train") return run_train(o);
    if (name == "infer") return run_infer(o);
    if (name == "eval") return run_eval(o);
    if (name == "analyze-variance") return run_variance(o);
    if (name == "validate") {
      if (o.bank_path.empty() && o.frames_path.empty() && o.model_path.empty())
        throw ConfigError("validate needs --bank, --frames or --model");
      return run_validate(o);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  }
  return kExitUsage;
}
