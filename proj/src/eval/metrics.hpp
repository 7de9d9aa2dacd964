#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sea {

// Verification-trial machinery over d-vectors.  Scores are cosine
// similarities; a trial is accepted when score >= threshold, so FAR falls
// and FRR rises as the threshold sweeps upward.

struct DVector {
  std::string utterance_id;
  int speaker_id = -1;
  std::vector<double> values;  // L2-normalized by the extractor
};

struct Centroid {
  int speaker_id = -1;
  std::vector<double> values;  // normalized mean of enrollment d-vectors
};

// Mean of the enrollment vectors, renormalized.  Throws ValidationError on
// an empty set and NumericError when the mean is degenerate (near zero).
Centroid enroll(int speaker_id, const std::vector<DVector>& enrollment);

double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

struct Trial {
  int target_speaker = -1;
  int probe_speaker = -1;
  double score = 0.0;
  bool genuine = false;
};

enum class TrialPolicy {
  kRandom,      // each probe against one uniformly random centroid
  kOwn,         // each probe against its own speaker's centroid (genuine)
  kOther,       // each probe against one random foreign centroid (impostor)
  kExhaustive,  // every probe against every centroid
};

std::vector<Trial> build_trials(const std::vector<Centroid>& centroids,
                                const std::vector<DVector>& probes,
                                TrialPolicy policy, uint64_t seed);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over the distinct observed scores with linear
// interpolation between adjacent thresholds at the FAR/FRR crossing.
EerResult compute_eer(const std::vector<double>& genuine,
                      const std::vector<double>& impostor);
EerResult compute_eer(const std::vector<Trial>& trials);

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// One point per distinct score plus the (far=1,frr=0) and (far=0,frr=1)
// endpoints at -inf/+inf thresholds; ascending threshold order.
std::vector<DetPoint> det_curve(const std::vector<double>& genuine,
                                const std::vector<double>& impostor);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), fpr nondecreasing
  double auc = 0.0;              // trapezoidal area
};

// Positives should score higher than negatives; classify positive when
// score >= threshold.  For the adversarial task positives are real
// utterances and negatives are generated ones.
RocResult roc_from_scores(const std::vector<double>& positives,
                          const std::vector<double>& negatives);

// CSV emitters (header + one row per entry).
void write_trials_csv(const std::string& path, const std::vector<Trial>& trials);
void write_det_csv(const std::string& path, const std::vector<DetPoint>& det);
void write_roc_csv(const std::string& path, const std::vector<RocPoint>& roc);

// Binary d-vector export: magic "SEAV", per-record utterance id, speaker,
// real/generated tag, and the vector values.
void write_dvectors(const std::string& path, const std::vector<DVector>& dvecs,
                    const std::vector<uint8_t>& generated_tags);
std::vector<DVector> read_dvectors(const std::string& path,
                                   std::vector<uint8_t>* generated_tags);

}  // namespace sea
