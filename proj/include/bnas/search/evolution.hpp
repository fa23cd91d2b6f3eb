#pragma once
// Evolutionary search over expansion codes.
//
// fitness = max(acc - lambda * flops_norm, 0), acc in percent.
// Generation 0 is random (plus the uniform-1x and uniform-4x anchors); every
// later generation keeps the elites and fills the rest with children bred by
// tournament selection, uniform crossover and forced-change mutation.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bnas/arch/code.hpp"
#include "bnas/arch/cost.hpp"

namespace bnas::search {

struct Individual {
  arch::ExpansionCode code;
  double acc = 0.0;  // Top-1 validation accuracy, percent
  arch::CostReport cost;
  double fitness = 0.0;
  std::uint64_t eval_seed = 0;
  bool diverged = false;

  bool operator==(const Individual&) const = default;
};

struct SearchConfig {
  std::size_t population_size = 32;
  int generations = 50;
  double lambda = 4.0;
  int proxy_epochs = 10;
  std::size_t tournament_size = 2;
  double crossover_rate = 0.9;
  /// Per-gene probability; 1/n_genes when unset.
  std::optional<double> mutation_rate;
  std::size_t elitism_count = 2;
  std::uint64_t master_seed = 0;
  bool inject_anchors = true;
  /// Concurrent candidate evaluations.
  std::size_t workers = 1;

  void validate() const;
  double mutation_rate_for(std::size_t n_genes) const;
};

struct SearchLogRecord {
  int generation = 0;
  std::size_t index = 0;
  arch::ExpansionCode code;
  double acc = 0.0;
  double flops = 0.0;
  double flops_norm = 0.0;
  double speedup = 0.0;
  std::uint64_t weight_bits = 0;
  double fitness = 0.0;
  std::uint64_t eval_seed = 0;
  double wall_time = 0.0;  // seconds spent evaluating; 0 for carried elites
  bool elite = false;      // carried over unchanged from the previous generation
  bool diverged = false;
  bool selection_fallback = false;  // bred from an all-zero-fitness population

  bool operator==(const SearchLogRecord&) const = default;
};

double fitness(double acc_percent, double flops_norm, double lambda);

using Rng = std::mt19937_64;

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);
/// Uniform in [0, 1).
double uniform_unit(Rng& rng);

arch::ExpansionCode random_code(std::size_t n_genes, Rng& rng);

/// Tournament of `tournament_size` distinct members; highest fitness wins,
/// ties go to the lowest index. If every fitness is zero, a uniform random member.
std::size_t select_parent(std::span<const Individual> population, std::size_t tournament_size, Rng& rng);

/// Uniform crossover: each gene from `a` with probability 0.5. With
/// probability 1 - crossover_rate the child is a copy of `a`.
arch::ExpansionCode crossover(const arch::ExpansionCode& a, const arch::ExpansionCode& b, double crossover_rate,
                              Rng& rng);

/// Each gene, with probability `rate`, becomes one of the five other ratios.
arch::ExpansionCode mutate(const arch::ExpansionCode& code, double rate, Rng& rng);

/// Scores one code. Must be a pure function of (code, eval_seed) and safe to call concurrently.
using Evaluator = std::function<Individual(const arch::ExpansionCode& code, std::uint64_t eval_seed)>;

/// Seed of the candidate at (generation, index).
std::uint64_t candidate_seed(std::uint64_t master_seed, int generation, std::size_t index);

struct SearchResult {
  Individual best;
  std::vector<SearchLogRecord> log;
};

/// Called once per finished generation with that generation's K records.
using GenerationCallback = std::function<void(std::span<const SearchLogRecord> records)>;

SearchLogRecord make_record(int generation, std::size_t index, const Individual& ind, double wall_time,
                            bool elite, bool fallback);

/// Runs the search. `prior` holds the records of already completed
/// generations (resumption); it must consist of whole generations.
SearchResult evolve(std::size_t n_genes, const Evaluator& evaluate, const SearchConfig& config,
                    std::span<const SearchLogRecord> prior = {}, const GenerationCallback& on_generation = {});

}  // namespace bnas::search
