#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "common/error.hpp"
#include "common/binio.hpp"
#include "common/rng.hpp"

namespace sea {

Centroid enroll(int speaker_id, const std::vector<DVector>& enrollment) {
  check_arg(!enrollment.empty(), "enroll: empty enrollment set");
  const size_t dim = enrollment[0].values.size();
  check_arg(dim > 0, "enroll: zero-dimensional d-vectors");
  Centroid c;
  c.speaker_id = speaker_id;
  c.values.assign(dim, 0.0);
  for (const auto& d : enrollment) {
    check_arg(d.values.size() == dim, "enroll: inconsistent d-vector dims");
    for (size_t i = 0; i < dim; ++i) c.values[i] += d.values[i];
  }
  double ss = 0.0;
  for (double& x : c.values) {
    x /= double(enrollment.size());
    ss += x * x;
  }
  check_numeric(ss > 1e-12,
                "enroll: degenerate centroid (enrollment vectors cancel)");
  double inv = 1.0 / std::sqrt(ss);
  for (double& x : c.values) x *= inv;
  return c;
}

double cosine_score(const std::vector<double>& a, const std::vector<double>& b) {
  check_arg(a.size() == b.size() && !a.empty(), "cosine: dim mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  check_numeric(na > 1e-24 && nb > 1e-24, "cosine: zero-norm vector");
  return dot / std::sqrt(na * nb);
}

std::vector<Trial> build_trials(const std::vector<Centroid>& centroids,
                                const std::vector<DVector>& probes,
                                TrialPolicy policy, uint64_t seed) {
  check_arg(!centroids.empty(), "build_trials: no centroids");
  check_arg(!probes.empty(), "build_trials: no probes");
  auto find_centroid = [&](int speaker_id) -> const Centroid* {
    for (const auto& c : centroids) {
      if (c.speaker_id == speaker_id) return &c;
    }
    return nullptr;
  };
  Rng rng(hash_seed(seed, 0x747269616cULL));
  std::vector<Trial> trials;
  auto push = [&](const Centroid& c, const DVector& p) {
    Trial t;
    t.target_speaker = c.speaker_id;
    t.probe_speaker = p.speaker_id;
    t.score = cosine_score(c.values, p.values);
    t.genuine = c.speaker_id == p.speaker_id;
    trials.push_back(t);
  };
  switch (policy) {
    case TrialPolicy::kRandom:
      for (const auto& p : probes) {
        push(centroids[rng.uniform_int(centroids.size())], p);
      }
      break;
    case TrialPolicy::kOwn:
      for (const auto& p : probes) {
        const Centroid* c = find_centroid(p.speaker_id);
        check_arg(c != nullptr, "build_trials: probe speaker has no centroid");
        push(*c, p);
      }
      break;
    case TrialPolicy::kOther: {
      check_arg(centroids.size() >= 2,
                "build_trials: impostor policy needs >= 2 centroids");
      for (const auto& p : probes) {
        const Centroid* c;
        do {
          c = &centroids[rng.uniform_int(centroids.size())];
        } while (c->speaker_id == p.speaker_id);
        push(*c, p);
      }
      break;
    }
    case TrialPolicy::kExhaustive:
      for (const auto& p : probes) {
        for (const auto& c : centroids) push(c, p);
      }
      break;
  }
  return trials;
}

EerResult compute_eer(const std::vector<double>& genuine,
                      const std::vector<double>& impostor) {
  check_arg(!genuine.empty() && !impostor.empty(),
            "eer: need both genuine and impostor scores");
  std::set<double> tset(genuine.begin(), genuine.end());
  tset.insert(impostor.begin(), impostor.end());
  std::vector<double> thresholds(tset.begin(), tset.end());

  auto far_at = [&](double t) {
    int64_t acc = 0;
    for (double s : impostor) acc += s >= t ? 1 : 0;
    return double(acc) / double(impostor.size());
  };
  auto frr_at = [&](double t) {
    int64_t rej = 0;
    for (double s : genuine) rej += s < t ? 1 : 0;
    return double(rej) / double(genuine.size());
  };

  // Append a virtual threshold above every score: (far=0, frr=1).  At the
  // lowest threshold far=1 >= frr=0, so the crossing always exists.
  double prev_t = thresholds[0];
  double prev_far = far_at(prev_t), prev_frr = frr_at(prev_t);
  const size_t n = thresholds.size();
  for (size_t i = 1; i <= n; ++i) {
    double t, far, frr;
    if (i < n) {
      t = thresholds[i];
      far = far_at(t);
      frr = frr_at(t);
    } else {
      t = thresholds[n - 1] + 1.0;
      far = 0.0;
      frr = 1.0;
    }
    if (prev_far == prev_frr) return {prev_far, prev_t};
    if (far <= frr) {
      // Crossed between prev_t and t; interpolate both rates linearly in
      // the threshold and solve for equality.
      double num = prev_far - prev_frr;
      double den = (prev_far - prev_frr) + (frr - far);
      double alpha = den > 0.0 ? num / den : 0.0;
      EerResult r;
      r.eer = prev_far + (far - prev_far) * alpha;
      r.threshold = prev_t + (t - prev_t) * alpha;
      return r;
    }
    prev_t = t;
    prev_far = far;
    prev_frr = frr;
  }
  return {prev_far, prev_t};  // unreachable: virtual endpoint guarantees a crossing
}

EerResult compute_eer(const std::vector<Trial>& trials) {
  std::vector<double> gen, imp;
  for (const auto& t : trials) (t.genuine ? gen : imp).push_back(t.score);
  return compute_eer(gen, imp);
}

std::vector<DetPoint> det_curve(const std::vector<double>& genuine,
                                const std::vector<double>& impostor) {
  check_arg(!genuine.empty() && !impostor.empty(),
            "det: need both genuine and impostor scores");
  std::set<double> tset(genuine.begin(), genuine.end());
  tset.insert(impostor.begin(), impostor.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DetPoint> det;
  det.push_back({-inf, 1.0, 0.0});
  for (double t : tset) {
    DetPoint p;
    p.threshold = t;
    int64_t acc = 0, rej = 0;
    for (double s : impostor) acc += s >= t ? 1 : 0;
    for (double s : genuine) rej += s < t ? 1 : 0;
    p.far = double(acc) / double(impostor.size());
    p.frr = double(rej) / double(genuine.size());
    det.push_back(p);
  }
  det.push_back({inf, 0.0, 1.0});
  return det;
}

RocResult roc_from_scores(const std::vector<double>& positives,
                          const std::vector<double>& negatives) {
  check_arg(!positives.empty() && !negatives.empty(),
            "roc: need both positive and negative scores");
  std::set<double> tset(positives.begin(), positives.end());
  tset.insert(negatives.begin(), negatives.end());
  RocResult r;
  r.points.push_back({0.0, 0.0});
  // Sweep thresholds from high to low so the curve walks (0,0) -> (1,1).
  for (auto it = tset.rbegin(); it != tset.rend(); ++it) {
    double t = *it;
    int64_t tp = 0, fp = 0;
    for (double s : positives) tp += s >= t ? 1 : 0;
    for (double s : negatives) fp += s >= t ? 1 : 0;
    r.points.push_back({double(fp) / double(negatives.size()),
                        double(tp) / double(positives.size())});
  }
  r.points.push_back({1.0, 1.0});
  // The trapezoid area under the empirical curve equals the Mann-Whitney
  // statistic; the pair count gives it without accumulation rounding.
  int64_t greater = 0, ties = 0;
  for (double p : positives) {
    for (double n : negatives) {
      if (p > n)
        ++greater;
      else if (p == n)
        ++ties;
    }
  }
  r.auc = (double(greater) + 0.5 * double(ties)) /
          (double(positives.size()) * double(negatives.size()));
  return r;
}

namespace {

class CsvFile {
 public:
  explicit CsvFile(const std::string& path) : f_(std::fopen(path.c_str(), "w")) {
    check_io(f_ != nullptr, "cannot open " + path + " for writing");
    path_ = path;
  }
  ~CsvFile() {
    if (f_) std::fclose(f_);
  }
  void line(const std::string& s) {
    check_io(std::fputs(s.c_str(), f_) >= 0 && std::fputc('\n', f_) != EOF,
             "write failed on " + path_);
  }

 private:
  FILE* f_;
  std::string path_;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trials_csv(const std::string& path, const std::vector<Trial>& trials) {
  CsvFile f(path);
  f.line("score,label");
  for (const auto& t : trials) {
    f.line(num(t.score) + "," + (t.genuine ? "1" : "0"));
  }
}

void write_det_csv(const std::string& path, const std::vector<DetPoint>& det) {
  CsvFile f(path);
  f.line("threshold,far,frr");
  for (const auto& p : det) {
    f.line(num(p.threshold) + "," + num(p.far) + "," + num(p.frr));
  }
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& roc) {
  CsvFile f(path);
  f.line("fpr,tpr");
  for (const auto& p : roc) {
    f.line(num(p.fpr) + "," + num(p.tpr));
  }
}

void write_dvectors(const std::string& path, const std::vector<DVector>& dvecs,
                    const std::vector<uint8_t>& generated_tags) {
  check_arg(dvecs.size() == generated_tags.size(),
            "write_dvectors: tag count mismatch");
  std::ofstream os(path, std::ios::binary);
  check_io(os.good(), "cannot open " + path + " for writing");
  write_magic(os, "SEAV");
  write_u32(os, 1);
  write_u32(os, uint32_t(dvecs.size()));
  const uint32_t dim = dvecs.empty() ? 0 : uint32_t(dvecs[0].values.size());
  write_u32(os, dim);
  for (size_t i = 0; i < dvecs.size(); ++i) {
    check_arg(dvecs[i].values.size() == dim, "write_dvectors: dim mismatch");
    write_string(os, dvecs[i].utterance_id);
    write_u32(os, uint32_t(dvecs[i].speaker_id));
    write_u8(os, generated_tags[i]);
    for (double v : dvecs[i].values) write_f64(os, v);
  }
  check_io(os.good(), "write failed on " + path);
}

std::vector<DVector> read_dvectors(const std::string& path,
                                   std::vector<uint8_t>* generated_tags) {
  std::ifstream is(path, std::ios::binary);
  check_io(is.good(), "cannot open " + path);
  expect_magic(is, "SEAV", "d-vector file " + path);
  uint32_t version = read_u32(is);
  check_io(version == 1, "unsupported d-vector file version");
  uint32_t count = read_u32(is);
  uint32_t dim = read_u32(is);
  std::vector<DVector> out(count);
  if (generated_tags) generated_tags->resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    out[i].utterance_id = read_string(is);
    out[i].speaker_id = int(read_u32(is));
    uint8_t tag = read_u8(is);
    if (generated_tags) (*generated_tags)[i] = tag;
    out[i].values.resize(dim);
    for (uint32_t d = 0; d < dim; ++d) out[i].values[d] = read_f64(is);
  }
  return out;
}

}  // namespace sea
