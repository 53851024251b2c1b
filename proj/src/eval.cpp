/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "addlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "addlab/error.hpp"

namespace addlab {

std::size_t ScoreSet::count(Label l) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [l](const ScoreEntry& e) { return e.label == l; }));
}

void ScoreSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!std::isfinite(e.score))
      fail(Status::data, Reason::validation, "non-finite score for '" + e.id + "'");
    if (!e.id.empty() && !seen.insert(e.id).second)
      fail(Status::data, Reason::validation, "duplicate utterance id '" + e.id + "'");
  }
}

std::vector<DetPoint> det_points(const ScoreSet& scores) {
  std::vector<double> gen, spf;
  for (const auto& e : scores.entries)
    (e.label == Label::genuine ? gen : spf).push_back(e.score);
  std::sort(gen.begin(), gen.end());
  std::sort(spf.begin(), spf.end());
  std::vector<double> distinct;
  distinct.reserve(gen.size() + spf.size());
  std::merge(gen.begin(), gen.end(), spf.begin(), spf.end(), std::back_inserter(distinct));
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const double ng = static_cast<double>(gen.size());
  const double ns = static_cast<double>(spf.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DetPoint> pts;
  pts.reserve(distinct.size() + 1);
  // Threshold j sits just below distinct[j]: accepted are scores >= distinct[j].
  std::size_t gi = 0, si = 0;
  for (std::size_t j = 0; j <= distinct.size(); ++j) {
    double t;
    if (j == 0) {
      t = -inf;
    } else if (j == distinct.size()) {
      t = inf;
    } else {
      t = distinct[j - 1] + (distinct[j] - distinct[j - 1]) / 2;
    }
    if (j > 0) {
      const double below = distinct[j - 1];
      while (gi < gen.size() && gen[gi] <= below) ++gi;
      while (si < spf.size() && spf[si] <= below) ++si;
    }
    pts.push_back({t, ns > 0 ? (ns - static_cast<double>(si)) / ns : 0.0,
                   ng > 0 ? static_cast<double>(gi) / ng : 0.0});
  }
  return pts;
}

EerResult compute_eer(const ScoreSet& scores) {
  EerResult r;
  r.n_genuine = scores.count(Label::genuine);
  r.n_spoof = scores.count(Label::spoof);
  if (r.n_genuine == 0 || r.n_spoof == 0)
    fail(Status::usage, Reason::label, "EER needs both genuine and spoof scores");
  for (const auto& e : scores.entries)
    if (!std::isfinite(e.score))
      fail(Status::data, Reason::validation, "non-finite score for '" + e.id + "'");

  const auto pts = det_points(scores);
  std::size_t j = 0;
  while (pts[j].far - pts[j].frr > 0) ++j;  // pts.back() has FAR 0, FRR 1
  const double dj = pts[j].far - pts[j].frr;
  if (dj == 0) {
    r.eer = pts[j].far;
    r.threshold = pts[j].threshold;
    return r;
  }
  const auto& a = pts[j - 1];
  const auto& b = pts[j];
  const double da = a.far - a.frr;
  const double alpha = da / (da - dj);
  r.eer = a.far + alpha * (b.far - a.far);
  const bool fa = std::isfinite(a.threshold), fb = std::isfinite(b.threshold);
  if (fa && fb) {
    r.threshold = a.threshold + alpha * (b.threshold - a.threshold);
  } else if (fa) {
    r.threshold = a.threshold;
  } else if (fb) {
    r.threshold = b.threshold;
  } else {
    r.threshold = scores.entries.front().score;  // all scores tied
  }
  return r;
}

double genuine_probability(double logit_genuine, double logit_spoof) {
  return 1.0 / (1.0 + std::exp(logit_spoof - logit_genuine));
}

ScoreSet score_dataset(const Detector<float>& model, const Dataset& data,
                       std::size_t batch_size, std::size_t jobs) {
  if (model.config().cnn.num_classes != 2)
    fail(Status::data, Reason::incompatible, "scoring needs a two-class model");
  const auto pred = predict(model, data, batch_size, jobs);
  ScoreSet s;
  for (std::size_t i = 0; i < data.size(); ++i)
    s.entries.push_back({data.ids[i],
                         genuine_probability(pred.logits[2 * i], pred.logits[2 * i + 1]),
                         static_cast<Label>(data.labels[i])});
  return s;
}

ScoreSet score_utterances(const Checkpoint& ckpt, const DatasetManifest& manifest,
                          const std::vector<const ManifestRecord*>& records,
                          const std::vector<ViewSource>& sources,
                          std::vector<std::string>* errors, std::size_t jobs,
                          std::size_t batch_size) {
  const auto& expected = ckpt.model.views;
  bool same = expected.size() == sources.size();
  for (std::size_t i = 0; same && i < sources.size(); ++i)
    same = expected[i].name == sources[i].name;
  if (!same) {
    std::string want, got;
    for (const auto& v : expected) want += (want.empty() ? "" : ",") + v.name;
    for (const auto& v : sources) got += (got.empty() ? "" : ",") + v.name;
    fail(Status::data, Reason::incompatible,
         "views [" + got + "] do not match the checkpoint's [" + want + "]");
  }
  auto data = load_dataset(manifest, records, sources, errors, jobs);
  if (data.size() > 0) {
    for (std::size_t i = 0; i < expected.size(); ++i)
      if (data.views[i].dim != expected[i].dim || data.views[i].frames != expected[i].frames)
        fail(Status::data, Reason::incompatible,
             "view '" + expected[i].name + "' is (D, T) = (" +
                 std::to_string(data.views[i].dim) + ", " +
                 std::to_string(data.views[i].frames) + "), checkpoint expects (" +
                 std::to_string(expected[i].dim) + ", " +
                 std::to_string(expected[i].frames) + ")");
  }
  const auto model = build_detector(ckpt);
  auto s = score_dataset(model, data, batch_size, jobs);
  s.validate();
  return s;
}

std::string format_scores(const ScoreSet& s) {
  std::string out;
  for (const auto& e : s.entries)
    out += fmt::format("{}\t{}\t{}\n", e.id, e.score, label_name(e.label));
  return out;
}

ScoreSet parse_scores(const std::string& text) {
  ScoreSet s;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, score, label;
    if (!std::getline(ls, id, '\t') || !std::getline(ls, score, '\t') ||
        !std::getline(ls, label))
      fail(Status::data, Reason::format,
           "score line " + std::to_string(lineno) + ": expected id<TAB>score<TAB>label");
    ScoreEntry e;
    e.id = id;
    try {
      std::size_t used = 0;
      e.score = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      fail(Status::data, Reason::format,
           "score line " + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    e.label = parse_label(label);
    s.entries.push_back(std::move(e));
  }
  s.validate();
  return s;
}

std::string format_report(const EerResult& r, const std::vector<std::string>& skipped) {
  std::string out;
  out += "# score = P(genuine) from the classifier softmax; higher means more genuine\n";
  out += "# FAR = fraction of spoof with score >= threshold; "
         "FRR = fraction of genuine with score < threshold\n";
  for (auto s : skipped) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    out += "# skipped " + s + "\n";
  }
  out += fmt::format("eer={}  threshold={}  n_genuine={} n_spoof={}\n", r.eer,
                     r.threshold, r.n_genuine, r.n_spoof);
  return out;
}

}  // namespace addlab
