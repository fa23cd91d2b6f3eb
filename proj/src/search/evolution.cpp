#include "bnas/search/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "bnas/error.hpp"
#include "bnas/train/trainer.hpp"

namespace bnas::search {

using arch::ExpansionCode;
using arch::Ratio;

namespace {

constexpr std::uint64_t kBreedStream = 0xb4eedull;

Individual from_record(const SearchLogRecord& r) {
  Individual ind;
  ind.code = r.code;
  ind.acc = r.acc;
  ind.cost.flops = r.flops;
  ind.cost.flops_norm = r.flops_norm;
  ind.cost.speedup = r.speedup;
  ind.cost.weight_bits = r.weight_bits;
  ind.fitness = r.fitness;
  ind.eval_seed = r.eval_seed;
  ind.diverged = r.diverged;
  return ind;
}

// Evaluates jobs[i] into out[i] on up to `workers` threads.
void evaluate_all(const Evaluator& evaluate, std::span<const ExpansionCode> codes,
                  std::span<const std::uint64_t> seeds, std::vector<Individual>& out, std::vector<double>& seconds,
                  std::size_t workers) {
  out.assign(codes.size(), {});
  seconds.assign(codes.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < codes.size(); i = next++) {
      try {
        const auto start = std::chrono::steady_clock::now();
        out[i] = evaluate(codes[i], seeds[i]);
        seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), codes.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

// Stable ranking by fitness, best first.
std::vector<std::size_t> ranking(std::span<const Individual> population) {
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return population[a].fitness > population[b].fitness; });
  return order;
}

}  // namespace

void SearchConfig::validate() const {
  if (population_size < 2) throw InputError("population_size must be at least 2");
  if (generations < 1) throw InputError("generations must be at least 1");
  if (elitism_count >= population_size) throw InputError("elitism_count must be smaller than population_size");
  if (tournament_size < 1 || tournament_size > population_size)
    throw InputError("tournament_size must lie in [1, population_size]");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw InputError("crossover_rate must lie in [0,1]");
  if (mutation_rate && !(*mutation_rate >= 0.0 && *mutation_rate <= 1.0))
    throw InputError("mutation_rate must lie in [0,1]");
  if (lambda < 0.0) throw InputError("lambda must be non-negative");
  if (proxy_epochs < 0) throw InputError("proxy_epochs must be non-negative");
  if (inject_anchors && population_size < 2) throw InputError("anchors need population_size >= 2");
}

double SearchConfig::mutation_rate_for(std::size_t n_genes) const {
  return mutation_rate.value_or(n_genes ? 1.0 / static_cast<double>(n_genes) : 0.0);
}

double fitness(double acc_percent, double flops_norm, double lambda) {
  return std::max(acc_percent - lambda * flops_norm, 0.0);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the draw unbiased and independent of the standard library.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<std::size_t>(v % bound);
}

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ExpansionCode random_code(std::size_t n_genes, Rng& rng) {
  ExpansionCode code;
  for (std::size_t i = 0; i < n_genes; ++i) code.genes.push_back(Ratio::from_index(uniform_index(rng, Ratio::kCount)));
  return code;
}

std::size_t select_parent(std::span<const Individual> population, std::size_t tournament_size, Rng& rng) {
  if (population.empty()) throw InputError("cannot select from an empty population");
  if (std::ranges::all_of(population, [](const Individual& i) { return i.fitness == 0.0; }))
    return uniform_index(rng, population.size());
  const std::size_t k = std::min(tournament_size, population.size());
  std::vector<std::size_t> pool(population.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::size_t winner = population.size();
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t j = t + uniform_index(rng, pool.size() - t);
    std::swap(pool[t], pool[j]);
    const std::size_t cand = pool[t];
    if (winner == population.size() || population[cand].fitness > population[winner].fitness ||
        (population[cand].fitness == population[winner].fitness && cand < winner))
      winner = cand;
  }
  return winner;
}

ExpansionCode crossover(const ExpansionCode& a, const ExpansionCode& b, double crossover_rate, Rng& rng) {
  if (a.size() != b.size())
    throw InputError("crossover parents have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                     " genes");
  if (uniform_unit(rng) >= crossover_rate) return a;
  ExpansionCode child = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (rng() & 1) child.genes[i] = b.genes[i];
  return child;
}

ExpansionCode mutate(const ExpansionCode& code, double rate, Rng& rng) {
  ExpansionCode out = code;
  for (Ratio& gene : out.genes) {
    if (uniform_unit(rng) >= rate) continue;
    const std::size_t shift = 1 + uniform_index(rng, Ratio::kCount - 1);
    gene = Ratio::from_index((gene.index() + shift) % Ratio::kCount);
  }
  return out;
}

std::uint64_t candidate_seed(std::uint64_t master_seed, int generation, std::size_t index) {
  return train::mix_seed(master_seed, static_cast<std::uint64_t>(generation) + 1, index);
}

SearchLogRecord make_record(int generation, std::size_t index, const Individual& ind, double wall_time, bool elite,
                            bool fallback) {
  return {generation,        index,          ind.code,     ind.acc,      ind.cost.flops,
          ind.cost.flops_norm, ind.cost.speedup, ind.cost.weight_bits, ind.fitness, ind.eval_seed,
          wall_time,         elite,          ind.diverged, fallback};
}

SearchResult evolve(std::size_t n_genes, const Evaluator& evaluate, const SearchConfig& config,
                    std::span<const SearchLogRecord> prior, const GenerationCallback& on_generation) {
  config.validate();
  const std::size_t k = config.population_size;
  const double mutation_rate = config.mutation_rate_for(n_genes);
  SearchResult result;
  std::vector<Individual> population;
  bool have_best = false;
  auto consider = [&](const Individual& ind) {
    if (!have_best || ind.fitness > result.best.fitness) {
      result.best = ind;
      have_best = true;
    }
  };

  // Restore completed generations.
  if (prior.size() % k != 0)
    throw FormatError("search log holds " + std::to_string(prior.size()) + " records, not a multiple of population " +
                          std::to_string(k), prior.size());
  int start_generation = 0;
  for (std::size_t r = 0; r < prior.size(); ++r) {
    const SearchLogRecord& rec = prior[r];
    if (rec.generation != static_cast<int>(r / k) || rec.index != r % k)
      throw FormatError("search log record " + std::to_string(r) + " is out of order", r);
    if (rec.code.size() != n_genes) throw FormatError("search log record has the wrong gene count", r);
    result.log.push_back(rec);
    consider(from_record(rec));
  }
  if (!prior.empty()) {
    start_generation = prior.back().generation + 1;
    for (std::size_t r = prior.size() - k; r < prior.size(); ++r) population.push_back(from_record(prior[r]));
  }

  std::vector<Individual> evaluated;
  std::vector<double> seconds;
  for (int gen = start_generation; gen < config.generations; ++gen) {
    std::vector<SearchLogRecord> records;
    std::vector<ExpansionCode> codes;
    std::vector<std::uint64_t> seeds;
    std::vector<Individual> next;
    bool fallback = false;
    Rng rng(train::mix_seed(config.master_seed, kBreedStream, static_cast<std::uint64_t>(gen)));

    if (gen == 0) {
      if (config.inject_anchors) {
        codes.push_back(arch::uniform_code(1.0, n_genes));
        codes.push_back(arch::uniform_code(4.0, n_genes));
      }
      while (codes.size() < k) codes.push_back(random_code(n_genes, rng));
    } else {
      const std::vector<std::size_t> order = ranking(population);
      for (std::size_t e = 0; e < config.elitism_count; ++e) next.push_back(population[order[e]]);
      fallback = std::ranges::all_of(population, [](const Individual& i) { return i.fitness == 0.0; });
      while (next.size() + codes.size() < k) {
        const std::size_t pa = select_parent(population, config.tournament_size, rng);
        const std::size_t pb = select_parent(population, config.tournament_size, rng);
        const ExpansionCode child = crossover(population[pa].code, population[pb].code, config.crossover_rate, rng);
        codes.push_back(mutate(child, mutation_rate, rng));
      }
    }
    const std::size_t offset = next.size();
    for (std::size_t i = 0; i < codes.size(); ++i) seeds.push_back(candidate_seed(config.master_seed, gen, offset + i));
    evaluate_all(evaluate, codes, seeds, evaluated, seconds, config.workers);

    for (std::size_t i = 0; i < offset; ++i) records.push_back(make_record(gen, i, next[i], 0.0, true, fallback));
    for (std::size_t i = 0; i < evaluated.size(); ++i) {
      evaluated[i].code = codes[i];
      evaluated[i].eval_seed = seeds[i];
      records.push_back(make_record(gen, offset + i, evaluated[i], seconds[i], false, fallback));
      next.push_back(evaluated[i]);
    }
    // Elites were considered when first evaluated; ties keep the earliest.
    for (std::size_t i = offset; i < next.size(); ++i) consider(next[i]);
    population = std::move(next);
    result.log.insert(result.log.end(), records.begin(), records.end());
    if (on_generation) on_generation(records);
  }
  return result;
}

}  // namespace bnas::search
