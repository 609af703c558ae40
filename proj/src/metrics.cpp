// Copyright 2026 The POPE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pope/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <sstream>

#include "pope/error.hpp"
#include "pope/numeric.hpp"

namespace pope {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void Normalize(Embedding& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw ValidationError("zero embedding");
  for (double& x : v) x /= norm;
}

// Decodes one UTF-8 code point starting at pos; malformed bytes decode as
// themselves so tokenization never fails on bad input.
char32_t DecodeUtf8(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      len = 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      len = 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      len = 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) |
                                   (c2 << 6) | c3);
    }
  }
  len = 1;
  return b0;
}

bool IsUnicodeSpace(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

std::string StripPunct(std::string token) {
  auto punct = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  };
  std::size_t b = 0, e = token.size();
  while (b < e && punct(token[b])) ++b;
  while (e > b && punct(token[e - 1])) --e;
  return token.substr(b, e - b);
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts CountNgrams(const std::vector<std::string>& tokens,
                        std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i,
                                      tokens.begin() + i + n)];
  }
  return counts;
}

void RequireShape(const Matrix& s) {
  if (s.rows() == 0 || s.cols() == 0) {
    throw ValidationError("similarity matrix must be non-empty");
  }
}

}  // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension)
    : dimension_(dimension) {
  if (dimension_ == 0) throw ValidationError("embedding dimension must be > 0");
}

std::string HashingEmbeddingProvider::id() const {
  return "hash-trigram-fnv1a-" + std::to_string(dimension_);
}

Embedding HashingEmbeddingProvider::Embed(std::string_view text) const {
  if (text.empty()) throw ValidationError("empty document");
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back(' ');
  for (char c : text) {
    padded.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  padded.push_back(' ');

  Embedding v(dimension_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t k = 0; k < 3; ++k) {
      h ^= static_cast<unsigned char>(padded[i + k]);
      h *= kFnvPrime;
    }
    v[h % dimension_] += 1.0;
  }
  Normalize(v);
  return v;
}

void PrecomputedEmbeddingProvider::Add(std::string text, Embedding embedding) {
  if (embedding.empty()) throw ValidationError("empty embedding");
  if (dimension_ != 0 && embedding.size() != dimension_) {
    throw ValidationError("embedding dimension " +
                          std::to_string(embedding.size()) + " != " +
                          std::to_string(dimension_));
  }
  double sq = 0.0;
  for (double x : embedding) sq += x * x;
  if (std::fabs(std::sqrt(sq) - 1.0) > 1e-6) {
    throw ValidationError("embedding is not unit norm");
  }
  auto it = vectors_.find(text);
  if (it != vectors_.end()) {
    if (it->second != embedding) {
      throw ValidationError("conflicting embeddings for the same text");
    }
    return;
  }
  dimension_ = embedding.size();
  vectors_.emplace(std::move(text), std::move(embedding));
}

Embedding PrecomputedEmbeddingProvider::Embed(std::string_view text) const {
  if (text.empty()) throw ValidationError("empty document");
  auto it = vectors_.find(text);
  if (it == vectors_.end()) {
    throw ValidationError("no precomputed embedding for text \"" +
                          std::string(text.substr(0, 40)) + "\"");
  }
  return it->second;
}

Matrix Matrix::FromRows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ValidationError("ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("embedding dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("zero embedding");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

Matrix SimilarityMatrix(std::span<const std::string> generations,
                        std::span<const std::string> references,
                        const EmbeddingProvider& provider) {
  std::vector<Embedding> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(provider.Embed(r));
  Matrix s(generations.size(), references.size());
  for (std::size_t j = 0; j < generations.size(); ++j) {
    const Embedding g = provider.Embed(generations[j]);
    for (std::size_t k = 0; k < refs.size(); ++k) s(j, k) = Cosine(g, refs[k]);
  }
  return s;
}

double PlScore(const Matrix& similarity, std::span<const double> upvotes) {
  RequireShape(similarity);
  if (upvotes.size() != similarity.cols()) {
    throw ValidationError("upvotes/reference count mismatch");
  }
  double total = 0.0;
  for (double u : upvotes) {
    if (!std::isfinite(u) || u < 0.0) {
      throw ValidationError("upvotes must be finite and >= 0");
    }
    total += u;
  }
  std::vector<double> theta(upvotes.size());
  if (total > 0.0) {
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = upvotes[k] / total;
  } else {
    Warn("all upvotes are zero; using uniform reference weights");
    std::fill(theta.begin(), theta.end(), 1.0 / static_cast<double>(theta.size()));
  }
  CompensatedSum acc;
  for (std::size_t j = 0; j < similarity.rows(); ++j) {
    for (std::size_t k = 0; k < similarity.cols(); ++k) {
      acc.Add(theta[k] * similarity(j, k));
    }
  }
  return acc.value() / static_cast<double>(similarity.rows());
}

double Coverage(const Matrix& similarity, double delta) {
  RequireShape(similarity);
  std::size_t hit = 0;
  for (std::size_t k = 0; k < similarity.cols(); ++k) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < similarity.rows(); ++j) {
      best = std::max(best, similarity(j, k));
    }
    if (best > delta) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(similarity.cols());
}

double DistributionalAlignment(const Matrix& similarity, double tau) {
  RequireShape(similarity);
  if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
  const std::size_t m = similarity.cols();
  if (m == 1) return 1.0;
  std::vector<double> logits(m);
  for (std::size_t k = 0; k < m; ++k) {
    CompensatedSum col;
    for (std::size_t j = 0; j < similarity.rows(); ++j) col.Add(similarity(j, k));
    logits[k] = col.value() / tau;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(m);
  double z = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    p[k] = std::exp(logits[k] - peak);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return std::clamp(Entropy(p) / std::log(static_cast<double>(m)), 0.0, 1.0);
}

double Diversity(std::span<const Embedding> generations) {
  const std::size_t n = generations.size();
  if (n < 2) {
    throw ValidationError("diversity undefined for a single generation");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      acc.Add(Cosine(generations[i], generations[j]));
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return 1.0 - acc.value() / pairs;
}

double Helpfulness(std::span<const double> response,
                   std::span<const Embedding> replies,
                   std::span<const double> upvotes) {
  if (replies.empty()) throw ValidationError("helpfulness needs >= 1 reply");
  if (replies.size() != upvotes.size()) {
    throw ValidationError("upvotes/reply count mismatch");
  }
  const auto [lo, hi] = std::minmax_element(upvotes.begin(), upvotes.end());
  std::vector<double> w(upvotes.size());
  if (*hi > *lo) {
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] = 10.0 * (upvotes[k] - *lo) / (*hi - *lo);
      total += w[k];
    }
    for (double& v : w) v /= total;
  } else {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
  }
  CompensatedSum acc;
  for (std::size_t k = 0; k < replies.size(); ++k) {
    acc.Add(w[k] * Cosine(response, replies[k]));
  }
  return acc.value();
}

double Relevance(std::span<const double> query,
                 std::span<const double> response) {
  return Cosine(query, response);
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      std::string t = StripPunct(std::move(current));
      if (!t.empty()) tokens.push_back(std::move(t));
      current.clear();
    }
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 1;
    const char32_t cp = DecodeUtf8(text, pos, len);
    if (IsUnicodeSpace(cp)) {
      flush();
    } else if (len == 1) {
      current.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(text[pos]))));
    } else {
      current.append(text.substr(pos, len));
    }
    pos += len;
  }
  flush();
  return tokens;
}

double DistinctN(std::span<const std::vector<std::string>> texts, int n) {
  if (n < 1) throw ValidationError("n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& tokens : texts) {
    for (const auto& [gram, count] : CountNgrams(tokens, static_cast<std::size_t>(n))) {
      unique.insert(gram);
      total += count;
    }
  }
  if (total == 0) throw ValidationError("no tokens");
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double SentenceBleu(const std::vector<std::string>& candidate,
                    std::span<const std::vector<std::string>> references) {
  if (candidate.empty()) throw ValidationError("no tokens");
  if (references.empty()) throw ValidationError("BLEU needs a reference");
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts cand = CountNgrams(candidate, n);
    std::size_t total = 0;
    for (const auto& [_, c] : cand) total += c;
    if (total == 0) continue;  // candidate too short for this order

    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : CountNgrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    std::size_t clipped = 0;
    for (const auto& [gram, c] : cand) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    const double precision =
        clipped > 0 ? static_cast<double>(clipped) / static_cast<double>(total)
                    : 1.0 / (2.0 * static_cast<double>(total));
    log_sum += std::log(precision);
    ++orders;
  }

  const double c = static_cast<double>(candidate.size());
  double r = 0.0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& ref : references) {
    const double len = static_cast<double>(ref.size());
    const double gap = std::fabs(len - c);
    if (gap < best_gap || (gap == best_gap && len < r)) {
      best_gap = gap;
      r = len;
    }
  }
  const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum / orders);
}

double SelfBleu(std::span<const std::vector<std::string>> texts) {
  if (texts.size() < 2) throw ValidationError("self-BLEU undefined");
  CompensatedSum acc;
  std::vector<std::vector<std::string>> others;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    others.clear();
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (j != i) others.push_back(texts[j]);
    }
    acc.Add(SentenceBleu(texts[i], others));
  }
  return acc.value() / static_cast<double>(texts.size());
}

PrecomputedEmbeddingProvider CollectEmbeddings(
    std::span<const GenerationSet> sets) {
  PrecomputedEmbeddingProvider provider;
  for (const auto& set : sets) {
    if (set.query_text && set.query_embedding) {
      provider.Add(*set.query_text, *set.query_embedding);
    }
    for (const auto& g : set.generations) {
      if (g.embedding) provider.Add(g.text, *g.embedding);
    }
    for (const auto& r : set.references) {
      if (r.embedding) provider.Add(r.text, *r.embedding);
    }
  }
  return provider;
}

MetricReport BuildMetricReport(std::span<const GenerationSet> sets,
                               const MetricParams& params,
                               const EmbeddingProvider& provider) {
  if (sets.empty()) throw ValidationError("no queries");
  MetricReport report;
  report.params = params;
  report.embedder_id = provider.id();
  report.skipped.assign(kMetricCount, 0);

  for (const auto& set : sets) {
    if (set.generations.empty() || set.references.empty()) {
      throw ValidationError("query " + set.query_id +
                            ": needs >= 1 generation and >= 1 reference");
    }
    std::vector<std::string> gen_texts, ref_texts;
    std::vector<double> upvotes;
    for (const auto& g : set.generations) gen_texts.push_back(g.text);
    for (const auto& r : set.references) {
      ref_texts.push_back(r.text);
      upvotes.push_back(r.upvotes);
    }
    std::vector<Embedding> gen_emb, ref_emb;
    for (const auto& t : gen_texts) gen_emb.push_back(provider.Embed(t));
    for (const auto& t : ref_texts) ref_emb.push_back(provider.Embed(t));
    Matrix s(gen_emb.size(), ref_emb.size());
    for (std::size_t j = 0; j < gen_emb.size(); ++j) {
      for (std::size_t k = 0; k < ref_emb.size(); ++k) {
        s(j, k) = Cosine(gen_emb[j], ref_emb[k]);
      }
    }
    std::vector<std::vector<std::string>> tokens;
    for (const auto& t : gen_texts) tokens.push_back(Tokenize(t));

    QueryMetrics q;
    q.query_id = set.query_id;
    q.values.assign(kMetricCount, std::nullopt);
    auto attempt = [&](std::size_t slot, auto&& fn) {
      try {
        q.values[slot] = fn();
      } catch (const Error&) {
        ++report.skipped[slot];
      }
    };
    attempt(0, [&] { return PlScore(s, upvotes); });
    attempt(1, [&] { return Coverage(s, params.delta); });
    attempt(2, [&] { return DistributionalAlignment(s, params.tau); });
    attempt(3, [&] { return Diversity(gen_emb); });
    attempt(4, [&] {
      CompensatedSum acc;
      for (const auto& g : gen_emb) acc.Add(Helpfulness(g, ref_emb, upvotes));
      return acc.value() / static_cast<double>(gen_emb.size());
    });
    attempt(5, [&] {
      if (!set.query_text) throw ValidationError("no query text");
      const Embedding qe = provider.Embed(*set.query_text);
      CompensatedSum acc;
      for (const auto& g : gen_emb) acc.Add(Relevance(qe, g));
      return acc.value() / static_cast<double>(gen_emb.size());
    });
    attempt(6, [&] { return DistinctN(tokens, 1); });
    attempt(7, [&] { return DistinctN(tokens, 2); });
    attempt(8, [&] { return SelfBleu(tokens); });
    report.per_query.push_back(std::move(q));
  }

  report.corpus.assign(kMetricCount, std::nullopt);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    CompensatedSum acc;
    std::size_t count = 0;
    for (const auto& q : report.per_query) {
      if (q.values[m]) {
        acc.Add(*q.values[m]);
        ++count;
      }
    }
    if (count > 0) report.corpus[m] = acc.value() / static_cast<double>(count);
  }
  return report;
}

}  // namespace pope
