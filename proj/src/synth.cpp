#include "sgcap/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgcap/error.hpp"
#include "sgcap/rng.hpp"
#include "sgcap/text.hpp"

namespace sgcap {

SynthTemplates SynthTemplates::builtin() {
  SynthTemplates t;
  t.slot_order = {"subject", "verb", "object"};
  t.slots["subject"] = {"man", "woman", "boy", "girl", "dog", "cat", "chef", "player", "singer", "child"};
  t.slots["verb"] = {"plays", "rides", "eats", "cooks", "throws", "holds", "watches", "paints", "kicks", "carries"};
  t.slots["object"] = {"guitar", "bicycle", "apple", "soup", "ball", "piano", "horse", "cake", "book", "box"};
  t.patterns = {"a {subject} {verb} a {object}", "the {subject} {verb} the {object}",
                "there is a {subject} that {verb} a {object}"};
  return t;
}

SynthTemplates SynthTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open templates file " + path.string());
  SynthTemplates t;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw FormatError(path.string() + " line " + std::to_string(n) + ": expected '='");
    std::istringstream head(line.substr(0, eq));
    std::string kind, name;
    head >> kind >> name;
    std::string rest = line.substr(eq + 1);
    if (kind == "slot" && !name.empty()) {
      std::istringstream ws(rest);
      t.slot_order.push_back(name);
      for (std::string w; ws >> w;) t.slots[name].push_back(w);
    } else if (kind == "pattern") {
      const auto b = rest.find_first_not_of(" \t");
      const auto e = rest.find_last_not_of(" \t\r");
      if (b != std::string::npos) t.patterns.push_back(rest.substr(b, e - b + 1));
    } else {
      throw FormatError(path.string() + " line " + std::to_string(n) + ": unknown directive '" + kind + "'");
    }
  }
  t.validate();
  return t;
}

void SynthTemplates::validate() const {
  if (slot_order.empty()) throw ConfigError("templates: no slots");
  if (patterns.empty()) throw ConfigError("templates: no patterns");
  for (const auto& s : slot_order)
    if (!slots.contains(s) || slots.at(s).empty()) throw ConfigError("templates: slot '" + s + "' is empty");
  for (const auto& p : patterns)
    for (const auto& s : slot_order)
      if (p.find("{" + s + "}") == std::string::npos)
        throw ConfigError("templates: pattern '" + p + "' lacks slot {" + s + "}");
}

std::string synth_video_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vid%05zu", i);
  return buf;
}

namespace {

using Vec = std::vector<double>;

Vec gaussian(Rng& rng, std::size_t d, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(d);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

std::string realize(const std::string& pattern, const std::map<std::string, std::string>& fill) {
  std::string out = pattern;
  for (const auto& [slot, word] : fill) {
    const std::string key = "{" + slot + "}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + word.size()))
      out.replace(pos, key.size(), word);
  }
  return out;
}

}  // namespace

SynthCorpus synthesize_corpus(const SynthTemplates& templates, const SynthConfig& config) {
  templates.validate();
  if (config.size == 0) throw ConfigError("--size must be >= 1");
  if (config.dim == 0) throw ConfigError("--dim must be >= 1");
  if (config.frames_per_video == 0) throw ConfigError("--frames must be >= 1");
  const std::size_t d = config.dim;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));

  // Fixed geometry: word and pattern latents, per-dimension scales, centres.
  Rng geo(derive_seed(config.seed, {100}));
  std::map<std::string, std::map<std::string, Vec>> word_latent;
  for (const auto& s : templates.slot_order)
    for (const auto& w : templates.slots.at(s)) word_latent[s][w] = gaussian(geo, d, unit);
  std::vector<Vec> pattern_latent;
  for (std::size_t p = 0; p < templates.patterns.size(); ++p) pattern_latent.push_back(gaussian(geo, d, 0.3 * unit));
  Vec scale(d);
  std::lognormal_distribution<double> lognormal(0.0, 0.5);
  for (double& s : scale) s = lognormal(geo);
  const Vec text_centre = gaussian(geo, d, 0.5 * unit);
  Vec gap = gaussian(geo, d, unit);
  double gap_norm = 0.0;
  for (double x : gap) gap_norm += x * x;
  gap_norm = std::sqrt(gap_norm);
  for (double& x : gap) x *= config.modality_gap / gap_norm;

  SynthCorpus out;
  Rng rng(derive_seed(config.seed, {200}));
  const std::size_t n_slots = templates.slot_order.size();
  for (std::size_t i = 0; i < config.size; ++i) {
    std::map<std::string, std::string> fill;
    for (const auto& s : templates.slot_order) {
      const auto& choices = templates.slots.at(s);
      fill[s] = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    }
    const std::size_t pat = std::uniform_int_distribution<std::size_t>(0, templates.patterns.size() - 1)(rng);

    SentenceRecord rec;
    rec.text = realize(templates.patterns[pat], fill);
    rec.tokens = heuristic_content_tokens(rec.text);
    const Vec noise = gaussian(rng, d, config.sentence_noise * unit);
    rec.embedding.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      double z = pattern_latent[pat][j] + noise[j];
      for (const auto& s : templates.slot_order) z += word_latent[s][fill[s]][j];
      rec.embedding[j] = static_cast<float>(scale[j] * z + text_centre[j]);
    }

    const std::string id = synth_video_id(i);
    FrameSet video{id, d, {}};
    const std::size_t nf = config.frames_per_video;
    for (std::size_t f = 0; f < nf; ++f) {
      const double pos = nf == 1 ? 0.5 : static_cast<double>(f) / static_cast<double>(nf - 1);
      const Vec fn = gaussian(rng, d, config.frame_noise * unit);
      std::vector<float> frame(d);
      for (std::size_t j = 0; j < d; ++j) {
        double z = fn[j];
        for (std::size_t s = 0; s < n_slots; ++s) {
          // First slot fades out over the clip, last slot fades in.
          double w = 1.0;
          if (n_slots > 1 && s == 0) w = 1.5 - pos;
          if (n_slots > 1 && s == n_slots - 1) w = 0.5 + pos;
          z += w * word_latent[templates.slot_order[s]][fill[templates.slot_order[s]]][j];
        }
        frame[j] = static_cast<float>(scale[j] * z + text_centre[j] + gap[j]);
      }
      video.frames.push_back(std::move(frame));
    }

    out.captions.emplace_back(id, rec.text);
    for (const auto& p : templates.patterns) out.references.emplace_back(id, realize(p, fill));
    out.records.push_back(std::move(rec));
    out.videos.push_back(std::move(video));
  }
  return out;
}

void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  {
    std::ofstream out(dir / "corpus.tsv");
    if (!out) throw FormatError("cannot write " + (dir / "corpus.tsv").string());
    write_corpus(out, corpus.records);
  }
  auto write_pairs = [&](const std::filesystem::path& path, const std::vector<IdText>& rows) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (const auto& [id, text] : rows) out << id << '\t' << text << '\n';
  };
  write_pairs(dir / "captions.tsv", corpus.captions);
  write_pairs(dir / "references.tsv", corpus.references);
  for (const auto& v : corpus.videos) save_frames(v, dir / "frames" / (v.video_id + ".sgcf"));
}

}  // namespace sgcap
