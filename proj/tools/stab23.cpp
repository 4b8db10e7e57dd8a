// stab23: convergence, fuzz and bench experiments over the stabilizing 2-3 tree.
//
// Exit status: 0 success, 1 property violation, 2 usage error.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "stab23/stab23.hpp"

using namespace stab23;
using namespace stab23::harness;

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kUsage = 2;

struct RunConfig {
  std::string command;
  unsigned pmax = 3;
  std::uint64_t seed = 1;
  std::size_t trials = 10;
  std::size_t ops = 1000;
  std::string profile = "mixed";
  std::string scope = "all";
  double intensity = 0.1;
  std::string out = "-";
  unsigned locates = 2;
  unsigned attempts = 11;
  std::string dump_dot;
  std::string repro_dir = ".";
  bool mutant = false;
  bool pmax_set = false;

  Profile parsed_profile{};
  unsigned parsed_scope = 0;

  CleaningConfig cleaning() const { return {locates, attempts}; }
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_header(std::ostream& out, const RunConfig& cfg, const std::vector<unsigned>& sizes) {
  out << "# stab23 " << cfg.command << "\n";
  out << "# pmax=";
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? "," : "") << sizes[i];
  out << " seed=" << cfg.seed << " trials=" << cfg.trials << " ops=" << cfg.ops << " profile=" << cfg.profile
      << " scope=" << scope_name(cfg.parsed_scope) << " intensity=" << cfg.intensity << " locates=" << cfg.locates
      << " attempts=" << cfg.attempts << "\n";
  out << "# visit bound C=" << kDefaultVisitBound.c << " D=" << kDefaultVisitBound.d << "\n";
}

// Opens --out; "-" is stdout.
class Output {
public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw UsageError("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
  std::unique_ptr<std::ofstream> file_;
};

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::uint64_t trial_seed(const RunConfig& cfg, std::size_t trial) { return cfg.seed * 1000003 + trial; }

// Populated from empty, then corrupted. Counters restart at zero.
StabilizingTree corrupted_tree(const RunConfig& cfg, std::uint64_t seed, double fill) {
  StabilizingTree t(cfg.pmax, cfg.cleaning());
  const Key space = 2 * t.arena().capacity();
  populate(t, seed, static_cast<std::size_t>(fill * static_cast<double>(t.arena().capacity())), space);
  inject_corruption(t.arena(), {seed ^ 0x5bd1e995, cfg.parsed_scope, cfg.intensity, space});
  auto& inst = t.instrumentation();
  inst.operations = 0;
  inst.attempt_log.clear();
  std::fill(inst.attempts.begin(), inst.attempts.end(), 0);
  std::fill(inst.splits.begin(), inst.splits.end(), 0);
  return t;
}

// ---------------------------------------------------------------------------

int cmd_converge(const RunConfig& cfg) {
  Output out(cfg.out);
  std::vector<std::string> rows(cfg.trials);
  std::vector<char> ok(cfg.trials, 0);
  parallel_for(cfg.trials, [&](std::size_t trial) {
    const std::uint64_t seed = trial_seed(cfg, trial);
    StabilizingTree t = corrupted_tree(cfg, seed, 0.6);
    const auto stream = generate_history(seed, cfg.parsed_profile, cfg.ops, 2 * t.arena().capacity());
    const auto rep = measure_convergence(t, stream, kDefaultVisitBound);
    rows[trial] = csv_row(seed, cfg.pmax, t.arena().capacity(),
                          {seed ^ 0x5bd1e995, cfg.parsed_scope, cfg.intensity, 2 * t.arena().capacity()}, rep);
    ok[trial] = rep.ops_to_normal && rep.ops_to_safe && rep.violations == 0 && rep.items_lost == 0;
  });

  auto& os = out.stream();
  write_header(os, cfg, {cfg.pmax});
  os << kConvergenceCsvHeader << "\n";
  for (const auto& r : rows) os << r << "\n";
  const auto failed = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
  std::cerr << "converge: " << cfg.trials - failed << "/" << cfg.trials << " trials converged without violations\n";
  return failed ? kViolation : kOk;
}

// ---------------------------------------------------------------------------

struct FuzzTrial {
  std::vector<Violation> availability;
  std::vector<AllocRateViolation> alloc;
  std::size_t closure_breaks = 0;
};

// Replays `stream` on a copy of `start`. The mutant build hides every item a
// find returns, which the availability check must catch.
FuzzTrial replay(const RunConfig& cfg, const Arena& start, const std::vector<Invocation>& stream) {
  StabilizingTree t(start, cfg.cleaning());
  t.instrumentation().log_attempts = true;
  History h;
  h.initial_content = semantics::content_keys(t.arena());
  std::size_t before = h.initial_content.size();
  bool normal_seen = semantics::is_normal(t.arena());
  FuzzTrial res;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    HistoryEntry e;
    e.invocation = stream[i];
    e.response = apply(t, stream[i]);
    if (cfg.mutant && e.invocation.kind == OpKind::Find && e.response.kind == ResponseKind::Item) {
      e.response.kind = ResponseKind::Missing;
      e.response.item.reset();
    }
    e.content = semantics::content_keys(t.arena());
    e.content_before = before;
    e.content_after = e.content.size();
    before = e.content_after;
    h.entries.push_back(std::move(e));
    const bool normal = semantics::is_normal(t.arena());
    if (normal_seen && !normal) ++res.closure_breaks;
    normal_seen = normal_seen || normal;
  }
  res.availability = check_availability(h, cfg.pmax, t.arena().capacity(), kDefaultVisitBound);
  res.alloc = check_alloc_rate(t.instrumentation().attempt_log, stream.size(), cfg.pmax, cfg.attempts);
  return res;
}

bool failed(const FuzzTrial& r) { return !r.availability.empty() || !r.alloc.empty() || r.closure_breaks; }

// Shortest failing prefix: violations only accumulate as the prefix grows.
std::size_t minimize(const RunConfig& cfg, const Arena& start, const std::vector<Invocation>& stream) {
  std::size_t lo = 1, hi = stream.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (failed(replay(cfg, start, {stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(mid)})))
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

void write_reproducer(const RunConfig& cfg, std::size_t trial, const Arena& start,
                      const std::vector<Invocation>& prefix, const FuzzTrial& res, std::ostream& log) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.repro_dir);
  const std::string base = (fs::path(cfg.repro_dir) / ("repro-trial" + std::to_string(trial))).string();
  Snapshot(start).save(base + ".snap");
  std::ofstream ops(base + ".ops");
  ops << "# replay on " << base << ".snap with locates=" << cfg.locates << " attempts=" << cfg.attempts << "\n";
  ops << "kind,key\n";
  for (const auto& inv : prefix) ops << to_string(inv.kind) << ',' << inv.key << "\n";
  log << "# trial " << trial << ": reproducer " << base << ".snap + " << prefix.size() << " ops";
  if (!res.availability.empty()) log << "; " << to_string(res.availability.front().kind) << ": " << res.availability.front().detail;
  if (!res.alloc.empty()) log << "; alloc-rate k=" << res.alloc.front().window << " i=" << res.alloc.front().segment;
  if (res.closure_breaks) log << "; left the normal states";
  log << "\n";
}

int cmd_fuzz(const RunConfig& cfg) {
  Output out(cfg.out);
  struct Row {
    FuzzTrial res;
    Arena start{1};
    std::vector<Invocation> stream;
  };
  std::vector<Row> rows(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t trial) {
    const std::uint64_t seed = trial_seed(cfg, trial);
    std::mt19937_64 rng(seed);
    StabilizingTree t = corrupted_tree(cfg, seed, static_cast<double>(rng() % 101) / 100.0);
    rows[trial].start = t.arena();
    rows[trial].stream = generate_history(seed, cfg.parsed_profile, cfg.ops, 2 * t.arena().capacity());
    rows[trial].res = replay(cfg, rows[trial].start, rows[trial].stream);
  });

  auto& os = out.stream();
  write_header(os, cfg, {cfg.pmax});
  os << "trial,availability_violations,alloc_rate_violations,closure_breaks\n";
  std::size_t bad = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].res;
    os << i << ',' << r.availability.size() << ',' << r.alloc.size() << ',' << r.closure_breaks << "\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failed(rows[i].res)) continue;
    ++bad;
    const std::size_t len = minimize(cfg, rows[i].start, rows[i].stream);
    const std::vector<Invocation> prefix(rows[i].stream.begin(), rows[i].stream.begin() + static_cast<std::ptrdiff_t>(len));
    write_reproducer(cfg, i, rows[i].start, prefix, replay(cfg, rows[i].start, prefix), os);
  }
  std::cerr << "fuzz: " << cfg.trials << " trials x " << cfg.ops << " ops, " << bad << " failing\n";
  return bad ? kViolation : kOk;
}

// ---------------------------------------------------------------------------

template <typename T>
T percentile(std::vector<T> v, double p) {
  if (v.empty()) return T{};
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - (p > 0 ? 1 : 0);
  return v[std::min(idx, v.size() - 1)];
}

int cmd_bench(const RunConfig& cfg) {
  Output out(cfg.out);
  std::vector<unsigned> sizes;
  if (cfg.pmax_set)
    sizes.push_back(cfg.pmax);
  else
    for (unsigned p = 3; p <= 8; ++p) sizes.push_back(p);

  struct Row {
    std::size_t n = 0;
    std::uint64_t capacity = 0;
    std::vector<std::uint64_t> visits;
    std::vector<double> nanos;
  };
  std::vector<Row> rows(sizes.size());
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    StabilizingTree t(sizes[s], cfg.cleaning());
    const Key space = 2 * t.arena().capacity();
    populate(t, cfg.seed + sizes[s], t.arena().capacity() / 2, space);
    if (s == 0 && !cfg.dump_dot.empty()) {
      std::filesystem::create_directories(cfg.dump_dot);
      std::ofstream(std::filesystem::path(cfg.dump_dot) / "base.dot")
          << semantics::to_dot(t.arena(), semantics::base_tree(t.arena()), "base");
      std::ofstream(std::filesystem::path(cfg.dump_dot) / "active.dot")
          << semantics::to_dot(t.arena(), semantics::active_tree(t.arena()), "active");
    }
    Row& row = rows[s];
    row.n = semantics::content(t.arena()).size();
    row.capacity = t.arena().capacity();
    for (const auto& inv : generate_history(cfg.seed + 100 + sizes[s], cfg.parsed_profile, cfg.ops, space)) {
      const auto t0 = std::chrono::steady_clock::now();
      const Response r = apply(t, inv);
      row.nanos.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count());
      row.visits.push_back(r.visits);
    }
  }

  auto& os = out.stream();
  write_header(os, cfg, sizes);
  os << "# wall-time columns (ns_*) are not deterministic\n";
  os << "pmax,K,n,log2n,ops,visits_p50,visits_p90,visits_p99,visits_max,ns_p50,ns_p90,ns_p99\n";
  bool over = false;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const Row& r = rows[s];
    const auto vmax = r.visits.empty() ? 0 : *std::max_element(r.visits.begin(), r.visits.end());
    over = over || vmax > kDefaultVisitBound.limit(sizes[s]);
    os << sizes[s] << ',' << r.capacity << ',' << r.n << ',' << (r.n ? std::bit_width(r.n) - 1 : 0) << ','
       << r.visits.size() << ',' << percentile(r.visits, 0.5) << ',' << percentile(r.visits, 0.9) << ','
       << percentile(r.visits, 0.99) << ',' << vmax << ',' << static_cast<std::uint64_t>(percentile(r.nanos, 0.5))
       << ',' << static_cast<std::uint64_t>(percentile(r.nanos, 0.9)) << ','
       << static_cast<std::uint64_t>(percentile(r.nanos, 0.99)) << "\n";
  }
  return over ? kViolation : kOk;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--pmax", cfg.pmax, "maximum tree height (capacity 3^pmax)")
      ->check(CLI::Range(1u, Arena::kMaxPmax))
      ->each([&](const std::string&) { cfg.pmax_set = true; });
  sub->add_option("--seed", cfg.seed, "base random seed");
  sub->add_option("--trials", cfg.trials, "number of trials");
  sub->add_option("--ops", cfg.ops, "operations per trial");
  sub->add_option("--profile", cfg.profile, "mixed, insert-heavy, delete-heavy or read-heavy");
  sub->add_option("--scope", cfg.scope, "corruption scope: keys,links,registers,freelists or all");
  sub->add_option("--intensity", cfg.intensity, "probability that a field in scope is rewritten")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--out", cfg.out, "output path, - for stdout");
  sub->add_option("--locates", cfg.locates, "internal locates per operation");
  sub->add_option("--attempts", cfg.attempts, "collection attempts per operation")->check(CLI::Range(1u, 1000u));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stabilizing 2-3 tree experiments"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* converge = app.add_subcommand("converge", "corrupt, replay and report convergence per trial");
  add_common(converge, cfg);
  auto* fuzz = app.add_subcommand("fuzz", "random corrupted states and histories against the availability checks");
  add_common(fuzz, cfg);
  fuzz->add_option("--repro-dir", cfg.repro_dir, "directory for reproducer snapshots");
  fuzz->add_flag("--mutant", cfg.mutant, "harness self-test: hide every item find returns");
  auto* bench = app.add_subcommand("bench", "visits and wall time per operation on legitimate trees");
  add_common(bench, cfg);
  bench->add_option("--dump-dot", cfg.dump_dot, "directory for base.dot and active.dot of the smallest tree");
  cfg.ops = 1000;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    cfg.parsed_profile = parse_profile(cfg.profile);
    cfg.parsed_scope = parse_scope(cfg.scope);
    if (converge->parsed()) {
      cfg.command = "converge";
      return cmd_converge(cfg);
    }
    if (fuzz->parsed()) {
      cfg.command = "fuzz";
      return cmd_fuzz(cfg);
    }
    cfg.command = "bench";
    return cmd_bench(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  }
}
