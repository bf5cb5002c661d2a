#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"
#include "sgcap/corpus.hpp"
#include "sgcap/inference.hpp"

namespace sgcap {

// Subject-verb-object style sentence templates. Patterns reference slots as
// "{name}"; every slot word owns a latent direction.
struct SynthTemplates {
  std::vector<std::string> slot_order;
  std::map<std::string, std::vector<std::string>> slots;
  std::vector<std::string> patterns;

  static SynthTemplates builtin();
  // File format: "slot <name> = w1 w2 ..." and "pattern = text with {name}" lines.
  static SynthTemplates load(const std::filesystem::path& path);
  void validate() const;
};

struct SynthConfig {
  std::size_t size = 500;
  std::size_t dim = 32;
  std::uint64_t seed = 42;
  std::size_t frames_per_video = 8;
  double sentence_noise = 0.15;  // per-sentence jitter around the event latent
  double frame_noise = 0.35;     // per-frame jitter
  double modality_gap = 0.5;     // norm of the offset separating frame and text centres
};

struct SynthCorpus {
  std::vector<SentenceRecord> records;       // record i describes video i
  std::vector<FrameSet> videos;
  std::vector<IdText> captions;              // (video id, ground-truth sentence)
  std::vector<IdText> references;            // every realization of each video's event
};

// Sentence embedding = per-dimension scale * (sum of slot-word latents +
// pattern latent + noise) + text centre. Video frames follow the same event
// latent with per-frame noise, a subject-to-object emphasis drift over time,
// and an image centre offset from the text centre by the modality gap.
SynthCorpus synthesize_corpus(const SynthTemplates& templates, const SynthConfig& config);

std::string synth_video_id(std::size_t i);

// Writes corpus.tsv, captions.tsv, references.tsv and frames/<id>.sgcf.
void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace sgcap
