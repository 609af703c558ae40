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

#ifndef POPE_METRICS_HPP_
#define POPE_METRICS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pope {

using Embedding = std::vector<double>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Unit-norm vector of dimension(); identical text gives identical output.
  virtual Embedding Embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string id() const = 0;
};

// Hashed character-trigram term frequencies. Text is ASCII-lowercased and
// padded with one space on each side; every byte trigram is hashed with
// 64-bit FNV-1a (offset 0xcbf29ce484222325, prime 0x100000001b3) and counted
// in bucket hash % dimension. The count vector is L2-normalized.
class HashingEmbeddingProvider : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashingEmbeddingProvider(std::size_t dimension = kDefaultDimension);

  Embedding Embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string id() const override;

 private:
  std::size_t dimension_;
};

// Looks up vectors supplied alongside the texts.
class PrecomputedEmbeddingProvider : public EmbeddingProvider {
 public:
  // Throws on a dimension change, a non-unit vector, or a conflicting
  // vector for text already present.
  void Add(std::string text, Embedding embedding);

  Embedding Embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string id() const override { return "precomputed"; }

 private:
  std::map<std::string, Embedding, std::less<>> vectors_;
  std::size_t dimension_ = 0;
};

// Row-major N x M.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix FromRows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double Cosine(std::span<const double> a, std::span<const double> b);

// S(j, k) = cos(e(gen_j), e(ref_k)). Empty text throws "empty document".
Matrix SimilarityMatrix(std::span<const std::string> generations,
                        std::span<const std::string> references,
                        const EmbeddingProvider& provider);

// (1/N) sum_j sum_k theta_k S(j, k) with theta = upvotes / sum(upvotes).
// All-zero upvotes fall back to uniform theta with a warning.
double PlScore(const Matrix& similarity, std::span<const double> upvotes);

inline constexpr double kDefaultCoverageDelta = 0.8;
inline constexpr double kDefaultAlignmentTau = 0.5;

// Fraction of references whose best-matching generation exceeds delta.
double Coverage(const Matrix& similarity, double delta = kDefaultCoverageDelta);

// Normalized entropy of softmax(column sums / tau). Defined as 1 when M = 1.
double DistributionalAlignment(const Matrix& similarity,
                               double tau = kDefaultAlignmentTau);

// 1 - mean pairwise cosine. The normalization constant is fixed at 1.
double Diversity(std::span<const Embedding> generations);

double Helpfulness(std::span<const double> response,
                   std::span<const Embedding> replies,
                   std::span<const double> upvotes);

double Relevance(std::span<const double> query,
                 std::span<const double> response);

// Lowercase, split on Unicode whitespace, strip leading and trailing ASCII
// punctuation; tokens left empty are dropped.
std::vector<std::string> Tokenize(std::string_view text);

// Unique n-grams over total n-grams, pooled across texts.
double DistinctN(std::span<const std::vector<std::string>> texts, int n);

// Smoothed BLEU-4 of one candidate against references.
double SentenceBleu(const std::vector<std::string>& candidate,
                    std::span<const std::vector<std::string>> references);

// Mean BLEU of each text against all others.
double SelfBleu(std::span<const std::vector<std::string>> texts);

struct GeneratedText {
  std::string text;
  std::optional<Embedding> embedding;
};

struct ReferenceText {
  std::string text;
  double upvotes = 0.0;
  std::optional<Embedding> embedding;
};

struct GenerationSet {
  std::string query_id;
  std::optional<std::string> query_text;
  std::optional<Embedding> query_embedding;
  std::vector<GeneratedText> generations;
  std::vector<ReferenceText> references;
};

struct MetricParams {
  double delta = kDefaultCoverageDelta;
  double tau = kDefaultAlignmentTau;
};

// Metric names in report order.
inline constexpr const char* kMetricNames[] = {
    "pl_score",  "coverage",  "distributional_alignment",
    "diversity", "helpfulness", "relevance",
    "distinct_1", "distinct_2", "self_bleu"};
inline constexpr std::size_t kMetricCount = 9;

struct QueryMetrics {
  std::string query_id;
  // Indexed like kMetricNames; empty when the metric's precondition failed.
  std::vector<std::optional<double>> values;
};

struct MetricReport {
  MetricParams params;
  std::string embedder_id;
  double diversity_normalizer = 1.0;
  std::vector<QueryMetrics> per_query;
  // Unweighted mean over the queries where the metric was defined.
  std::vector<std::optional<double>> corpus;
  std::vector<std::size_t> skipped;
};

// Helpfulness and relevance are averaged over the generations of a query;
// relevance is skipped when the query carries no text or embedding.
MetricReport BuildMetricReport(std::span<const GenerationSet> sets,
                               const MetricParams& params,
                               const EmbeddingProvider& provider);

// Registers every embedding present in the sets.
PrecomputedEmbeddingProvider CollectEmbeddings(
    std::span<const GenerationSet> sets);

}  // namespace pope

#endif  // POPE_METRICS_HPP_
