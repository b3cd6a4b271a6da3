#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cmet/errors.hpp"
#include "cmet/rng.hpp"

namespace cmet {

enum class Space { audio, visual };

inline const char* space_name(Space s) { return s == Space::audio ? "audio" : "visual"; }

// One utterance/clip pair: an audio embedding (d_a) and a visual clip of
// T frames (frame-major, T*d_v). Stored as float32, matching the container.
struct Sample {
  int identity = 0;
  int emotion = 0;
  std::string clip_id;
  std::vector<float> audio;
  std::vector<float> clip;
};

struct EmbeddingDataset {
  int d_a = 0, d_v = 0, T = 0;
  std::vector<std::string> emotions;
  std::vector<std::string> identities;
  std::vector<Sample> samples;
  std::string provenance;  // synthetic world config + seed, or import source

  // sample indices per (identity, emotion)
  std::map<std::pair<int, int>, std::vector<int>> groups;

  void build_index() {
    groups.clear();
    for (size_t i = 0; i < samples.size(); ++i)
      groups[{samples[i].identity, samples[i].emotion}].push_back((int)i);
  }

  const std::vector<int>& group(int identity, int emotion) const {
    static const std::vector<int> empty;
    auto it = groups.find({identity, emotion});
    return it == groups.end() ? empty : it->second;
  }

  int emotion_index(const std::string& name) const {
    for (size_t i = 0; i < emotions.size(); ++i)
      if (emotions[i] == name) return (int)i;
    throw config_error("unknown emotion '" + name + "'");
  }

  int identity_index(const std::string& name) const {
    for (size_t i = 0; i < identities.size(); ++i)
      if (identities[i] == name) return (int)i;
    throw config_error("unknown identity '" + name + "'");
  }

  void validate() const {
    for (const auto& s : samples) {
      if (s.identity < 0 || s.identity >= (int)identities.size())
        throw parse_error("sample '" + s.clip_id + "' references identity " + std::to_string(s.identity));
      if (s.emotion < 0 || s.emotion >= (int)emotions.size())
        throw parse_error("sample '" + s.clip_id + "' references emotion " + std::to_string(s.emotion));
      if ((int)s.audio.size() != d_a)
        throw parse_error("sample '" + s.clip_id + "' audio length " + std::to_string(s.audio.size()) +
                          " != d_a " + std::to_string(d_a));
      if ((int)s.clip.size() != T * d_v)
        throw parse_error("sample '" + s.clip_id + "' clip length " + std::to_string(s.clip.size()) +
                          " != T*d_v " + std::to_string(T * d_v));
    }
  }
};

// Emotion semantic vector: element-wise target - input within one space.
// Audio: frames = 1, width = d_a. Visual: frames = T, width = d_v.
struct SemanticVector {
  Space space = Space::audio;
  int frames = 1;
  int width = 0;
  std::vector<double> data;  // frames * width
};

struct EmbeddingView {
  Space space;
  int frames;
  int width;
  const float* data;  // frames * width values
};

inline EmbeddingView audio_view(const Sample& s, int d_a) {
  return {Space::audio, 1, d_a, s.audio.data()};
}
inline EmbeddingView clip_view(const Sample& s, int T, int d_v) {
  return {Space::visual, T, d_v, s.clip.data()};
}

inline SemanticVector semantic_vector(const EmbeddingView& target, const EmbeddingView& input) {
  if (target.space != input.space)
    throw usage_error(std::string("semantic_vector: space mismatch (") + space_name(target.space) +
                      " vs " + space_name(input.space) + ")");
  if (target.frames != input.frames || target.width != input.width)
    throw usage_error("semantic_vector: shape mismatch");
  SemanticVector sv;
  sv.space = target.space;
  sv.frames = target.frames;
  sv.width = target.width;
  const size_t n = (size_t)target.frames * target.width;
  sv.data.resize(n);
  for (size_t i = 0; i < n; ++i) sv.data[i] = (double)target.data[i] - (double)input.data[i];
  return sv;
}

// k-shot averaging: both lists are shuffled with the supplied generator, the
// first k of each are paired element-wise, and the k pairwise semantic
// vectors are averaged. `pairs` (optional) receives the chosen
// (input index, target index) pairs in pairing order.
inline SemanticVector k_shot_semantic_vector(const std::vector<EmbeddingView>& inputs,
                                             const std::vector<EmbeddingView>& targets, int k,
                                             Rng& rng, const std::string& group_label = "",
                                             std::vector<std::pair<int, int>>* pairs = nullptr) {
  if (k < 1) throw usage_error("k_shot_semantic_vector: k must be >= 1");
  if ((int)inputs.size() < k || (int)targets.size() < k)
    throw insufficient_data_error("need k=" + std::to_string(k) + " embeddings, have " +
                                  std::to_string(inputs.size()) + " inputs / " +
                                  std::to_string(targets.size()) + " targets" +
                                  (group_label.empty() ? "" : " for " + group_label));
  std::vector<int> pi(inputs.size()), pt(targets.size());
  for (size_t i = 0; i < pi.size(); ++i) pi[i] = (int)i;
  for (size_t i = 0; i < pt.size(); ++i) pt[i] = (int)i;
  rng.shuffle(pi);
  rng.shuffle(pt);

  SemanticVector acc;
  if (pairs) pairs->clear();
  for (int s = 0; s < k; ++s) {
    SemanticVector sv = semantic_vector(targets[pt[s]], inputs[pi[s]]);
    if (s == 0) {
      acc = std::move(sv);
    } else {
      for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += sv.data[i];
    }
    if (pairs) pairs->push_back({pi[s], pt[s]});
  }
  for (auto& v : acc.data) v /= k;
  return acc;
}

}  // namespace cmet
