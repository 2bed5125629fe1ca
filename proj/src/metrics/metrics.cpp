// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dfx/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "dfx/core/error.hpp"
#include "dfx/core/hash.hpp"

namespace dfx::metrics {

AucFraction auc_fraction(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  unsigned long long pos = 0, neg = 0, twice_wins = 0;
  unsigned long long neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    unsigned long long gp = 0, gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const int y = labels[order[j]];
      if (y != 0 && y != 1) throw ContractError("auc: labels must be 0 or 1");
      (y == 1 ? gp : gn)++;
      ++j;
    }
    twice_wins += gp * (2 * neg_below + gn);
    neg_below += gn;
    pos += gp;
    neg += gn;
    i = j;
  }
  if (pos == 0 || neg == 0) throw ContractError("auc: both classes must be present");
  return {twice_wins, 2 * pos * neg};
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto f = auc_fraction(scores, labels);
  return static_cast<double>(f.numerator) / static_cast<double>(f.denominator);
}

double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold) {
  if (scores.empty() || scores.size() != labels.size())
    throw ShapeError("accuracy: need equal, nonzero numbers of scores and labels");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    hit += static_cast<int>(scores[i] >= threshold) == labels[i];
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u) || std::ispunct(u)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts c;
  for (int i = 0; i + n <= static_cast<int>(t.size()); ++i)
    c[Tokens(t.begin() + i, t.begin() + i + n)]++;
  return c;
}

void require_items(std::span<const CaptionItem> items, const char* what) {
  if (items.empty()) throw ContractError(std::string(what) + ": empty evaluation set");
  for (const auto& it : items)
    if (it.references.empty())
      throw ContractError(std::string(what) + ": every item needs a reference");
}

int lcs(const Tokens& a, const Tokens& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu4(std::span<const CaptionItem> items) {
  require_items(items, "bleu4");
  double clipped[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  double hyp_len = 0, ref_len = 0;
  for (const auto& it : items) {
    const auto c = static_cast<double>(it.hypothesis.size());
    hyp_len += c;
    // Closest reference length; the shorter one on ties.
    std::size_t best = it.references[0].size();
    for (const auto& r : it.references) {
      const double d = std::abs(static_cast<double>(r.size()) - c);
      const double bd = std::abs(static_cast<double>(best) - c);
      if (d < bd || (d == bd && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (int n = 1; n <= 4; ++n) {
      const auto h = ngrams(it.hypothesis, n);
      NgramCounts max_ref;
      for (const auto& r : it.references)
        for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
      for (const auto& [g, k] : h) {
        const auto f = max_ref.find(g);
        clipped[n - 1] += std::min(k, f == max_ref.end() ? 0 : f->second);
        total[n - 1] += k;
      }
    }
  }
  double log_p = 0;
  for (int n = 0; n < 4; ++n) {
    const double p = clipped[n] > 0 ? clipped[n] / total[n] : kBleuEpsilon;
    log_p += 0.25 * std::log(p);
  }
  const double bp = hyp_len > ref_len ? 1.0
                    : hyp_len == 0    ? 0.0
                                      : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_p);
}

double rouge_l(std::span<const CaptionItem> items) {
  require_items(items, "rouge_l");
  double sum = 0;
  for (const auto& it : items) {
    double best = 0;
    for (const auto& r : it.references) {
      const int l = lcs(it.hypothesis, r);
      if (l == 0) continue;
      const double p = static_cast<double>(l) / static_cast<double>(it.hypothesis.size());
      const double rc = static_cast<double>(l) / static_cast<double>(r.size());
      const double b2 = kRougeBeta * kRougeBeta;
      best = std::max(best, (1 + b2) * p * rc / (rc + b2 * p));
    }
    sum += best;
  }
  return sum / static_cast<double>(items.size());
}

MeteorDetail meteor_single(const Tokens& hyp, const Tokens& ref) {
  MeteorDetail d;
  std::vector<bool> used(ref.size(), false);
  std::vector<int> align(hyp.size(), -1);
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    int pick = -1;
    // Prefer extending the current run.
    if (i > 0 && align[i - 1] >= 0) {
      const auto next = static_cast<std::size_t>(align[i - 1] + 1);
      if (next < ref.size() && !used[next] && ref[next] == hyp[i]) pick = static_cast<int>(next);
    }
    for (std::size_t j = 0; pick < 0 && j < ref.size(); ++j)
      if (!used[j] && ref[j] == hyp[i]) pick = static_cast<int>(j);
    if (pick >= 0) {
      used[static_cast<std::size_t>(pick)] = true;
      align[i] = pick;
      ++d.matches;
    }
  }
  if (d.matches == 0) return d;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (align[i] < 0) continue;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i] == align[i - 1] + 1;
    if (!continues) ++d.chunks;
  }
  const double m = d.matches;
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = 10 * p * r / (r + 9 * p);
  const double penalty = 0.5 * std::pow(d.chunks / m, 3);
  d.score = fmean * (1 - penalty);
  return d;
}

double meteor(std::span<const CaptionItem> items) {
  require_items(items, "meteor");
  double sum = 0;
  for (const auto& it : items) {
    double best = 0;
    for (const auto& r : it.references)
      best = std::max(best, meteor_single(it.hypothesis, r).score);
    sum += best;
  }
  return sum / static_cast<double>(items.size());
}

double cider(std::span<const CaptionItem> items) {
  require_items(items, "cider");
  if (items.size() < 2) throw ContractError("cider: needs at least two items");
  const double n_docs = static_cast<double>(items.size());
  double total = 0;
  std::vector<double> per_item(items.size(), 0.0);
  for (int n = 1; n <= 4; ++n) {
    // Document frequency over each item's reference set.
    std::map<Tokens, int> df;
    for (const auto& it : items) {
      std::set<Tokens> seen;
      for (const auto& r : it.references)
        for (const auto& [g, k] : ngrams(r, n)) seen.insert(g);
      for (const auto& g : seen) df[g]++;
    }
    auto vec = [&](const Tokens& t) {
      std::map<Tokens, double> v;
      const auto c = ngrams(t, n);
      double count = 0;
      for (const auto& [g, k] : c) count += k;
      for (const auto& [g, k] : c) {
        const auto f = df.find(g);
        const double dfv = f == df.end() ? 0.0 : f->second;
        v[g] = (k / count) * std::log(n_docs / std::max(1.0, dfv));
      }
      return v;
    };
    auto norm = [](const std::map<Tokens, double>& v) {
      double s = 0;
      for (const auto& [g, x] : v) s += x * x;
      return std::sqrt(s);
    };
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto h = vec(items[i].hypothesis);
      const double hn = norm(h);
      double acc = 0;
      for (const auto& r : items[i].references) {
        const auto rv = vec(r);
        const double rn = norm(rv);
        double dot = 0;
        for (const auto& [g, x] : h) {
          const auto f = rv.find(g);
          if (f != rv.end()) dot += x * f->second;
        }
        const double cos = (hn > 0 && rn > 0) ? dot / (hn * rn) : 0.0;
        const double delta = static_cast<double>(items[i].hypothesis.size()) -
                             static_cast<double>(r.size());
        acc += cos * std::exp(-delta * delta / (2 * kCiderSigma * kCiderSigma));
      }
      per_item[i] += acc / static_cast<double>(items[i].references.size());
    }
  }
  for (double v : per_item) total += v / 4.0 * 10.0;
  return total / n_docs;
}

double vqa_average(double b4, double cid, double rl, double met) {
  return (b4 + cid + rl + met) / 4.0;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.image_id = j.at("image_id").get<std::string>();
      p.score = j.at("score").get<double>();
      p.label = j.at("label").get<int>();
      if (j.contains("hypothesis") && !j["hypothesis"].is_null())
        p.hypothesis = j["hypothesis"].get<std::string>();
      if (j.contains("references")) {
        const auto& r = j["references"];
        if (r.is_string())
          p.references.push_back(r.get<std::string>());
        else if (r.is_array())
          p.references = r.get<std::vector<std::string>>();
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const std::filesystem::path& path,
                       std::span<const Prediction> predictions) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write predictions " + path.string());
  for (const auto& p : predictions) {
    nlohmann::json j = {{"image_id", p.image_id}, {"score", p.score}, {"label", p.label}};
    if (p.hypothesis) j["hypothesis"] = *p.hypothesis;
    if (!p.references.empty()) j["references"] = p.references;
    os << j.dump() << "\n";
  }
}

nlohmann::json evaluate(std::span<const Prediction> predictions, double threshold) {
  if (predictions.empty()) throw ContractError("evaluate: no predictions");
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<CaptionItem> items;
  Fnv1a h;
  h.update(std::to_string(threshold));
  for (const auto& p : predictions) {
    scores.push_back(p.score);
    labels.push_back(p.label);
    h.update(p.image_id);
    if (p.hypothesis && !p.references.empty()) {
      CaptionItem it;
      it.hypothesis = tokenize(*p.hypothesis);
      for (const auto& r : p.references) it.references.push_back(tokenize(r));
      items.push_back(std::move(it));
    }
  }
  nlohmann::json report;
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                    std::count(labels.begin(), labels.end(), 0) > 0;
  report["auc"] = both ? nlohmann::json(auc(scores, labels)) : nlohmann::json(nullptr);
  report["accuracy"] = accuracy(scores, labels, threshold);
  if (!items.empty()) {
    const double b = bleu4(items), r = rouge_l(items), m = meteor(items);
    report["bleu4"] = b;
    report["rouge_l"] = r;
    report["meteor"] = m;
    if (items.size() >= 2) {
      const double c = cider(items);
      report["cider"] = c;
      report["vqa_average"] = vqa_average(b, c, r, m);
    } else {
      report["cider"] = nullptr;
      report["vqa_average"] = nullptr;
    }
  } else {
    for (const char* k : {"bleu4", "cider", "rouge_l", "meteor", "vqa_average"})
      report[k] = nullptr;
  }
  report["n"] = predictions.size();
  report["n_caption_items"] = items.size();
  report["threshold"] = threshold;
  report["config_hash"] = hex64(h.digest());
  return report;
}

}  // namespace dfx::metrics
