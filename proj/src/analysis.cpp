#include "pnp/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include "pnp/errors.hpp"

namespace pnp {

double l2_norm(const Vector& u, const SparseMatrix& mass) {
  if (u.size() != mass.rows()) throw DataError("l2_norm: field length does not match the mass matrix");
  if (!u.allFinite()) throw DataError("l2_norm: non-finite field");
  return std::sqrt(std::max(0.0, u.dot(mass * u)));
}

LevelSetGrid Problem::build_grid() const {
  const GridSpec spec{n_cells};
  return obstacle ? make_level_set_grid(spec, center, radius) : make_square_grid(spec);
}

std::shared_ptr<const FemOperators> Problem::build_operators() const {
  return std::make_shared<const FemOperators>(pnp::build_operators(build_grid()));
}

std::optional<double> ConvergenceReport::finest_order() const {
  if (orders.empty()) return std::nullopt;
  return orders.back();
}

std::vector<std::optional<double>> orders_from_errors(const std::vector<std::optional<double>>& errors) {
  std::vector<std::optional<double>> orders;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    const auto& a = errors[k];
    const auto& b = errors[k + 1];
    if (a && b && std::isfinite(*a) && std::isfinite(*b) && *a > 0.0 && *b > 0.0) {
      orders.emplace_back(std::log2(*a / *b));
    } else {
      orders.emplace_back(std::nullopt);
    }
  }
  return orders;
}

ConvergenceReport richardson_orders(const std::function<RunOutcome(double)>& run,
                                    const std::function<double(const RunOutcome&, const RunOutcome&)>& distance,
                                    double dt0, int levels) {
  if (levels < 3) throw ConfigError("levels: at least 3 refinements are needed for an order");
  if (!(dt0 > 0.0)) throw ConfigError("dt0: must be positive");
  ConvergenceReport r;
  for (int k = 0; k < levels; ++k) {
    ConvergenceLevel level;
    level.dt = std::ldexp(dt0, -k);
    level.run = run(level.dt);
    if (level.run.blew_up) r.stable = false;
    r.levels.push_back(std::move(level));
  }
  for (int k = 0; k + 1 < levels; ++k) {
    const RunOutcome& a = r.levels[k].run;
    const RunOutcome& b = r.levels[k + 1].run;
    if (a.blew_up || b.blew_up) {
      r.errors.emplace_back(std::nullopt);
      continue;
    }
    const double e = distance(a, b);
    r.errors.emplace_back(std::isfinite(e) ? std::optional<double>(e) : std::nullopt);
  }
  r.orders = orders_from_errors(r.errors);
  const bool any_order = std::any_of(r.orders.begin(), r.orders.end(), [](const auto& o) { return o.has_value(); });
  r.verdict = !r.stable ? "unstable" : any_order ? "converged" : "degenerate";
  return r;
}

double species_distance(const StateVector& a, const StateVector& b, const PnpModel& model) {
  const PhysicalParams& p = model.params();
  const SpeciesDensities da = densities(a, p);
  const SpeciesDensities db = densities(b, p);
  const SparseMatrix& mass = model.ops().mass.matrix;
  const double ep = l2_norm(p.m_plus * (da.plus - db.plus), mass);
  const double em = l2_norm(p.m_minus * (da.minus - db.minus), mass);
  return std::hypot(ep, em);
}

RunOutcome simulate(const PnpModel& model, const StateVector& initial, const Scheme& scheme, double dt,
                    double t_final) {
  const int n = step_count(t_final, dt);
  const Diagnostics d0 = diagnostics(initial, model);
  RunOutcome out;
  AdvanceOptions opts;
  opts.record = false;
  opts.on_step = [&](const StateVector&, const StepRecord& rec) {
    auto rel = [](double m, double m0) { return m0 != 0.0 ? std::abs(m - m0) / std::abs(m0) : std::abs(m); };
    out.mass_drift = std::max({out.mass_drift, rel(rec.diag.mass_plus, d0.mass_plus),
                               rel(rec.diag.mass_minus, d0.mass_minus)});
  };
  Trajectory tr = advance(model, initial, dt, n, scheme, opts);
  out.blew_up = tr.blew_up;
  out.blowup_step = tr.blowup_step;
  out.steps = tr.steps_taken;
  out.seconds = tr.seconds;
  out.final_state = std::move(tr.final_state);
  return out;
}

ConvergenceReport convergence_study(const Problem& problem, std::shared_ptr<const FemOperators> ops,
                                    Formulation form, const Scheme& scheme, double t_final, double dt0,
                                    int levels) {
  if (!ops) ops = problem.build_operators();
  const PnpModel model(form, problem.params, ops);
  // Every level starts from the same bits.
  const StateVector start = initial_state(problem.initial, model);
  auto run = [&](double dt) { return simulate(model, start, scheme, dt, t_final); };
  auto dist = [&](const RunOutcome& a, const RunOutcome& b) {
    return species_distance(a.final_state, b.final_state, model);
  };
  ConvergenceReport r = richardson_orders(run, dist, dt0, levels);
  r.scheme = scheme.name();
  r.formulation = form;
  r.epsilon = problem.params.epsilon;
  return r;
}

const ScanCell* StabilityMatrix::find(const std::string& scheme, Formulation form, double epsilon) const {
  for (const ScanCell& c : cells) {
    if (c.scheme.name() == scheme && c.formulation == form && c.epsilon == epsilon) return &c;
  }
  return nullptr;
}

bool applicable(const Scheme& scheme, Formulation form, double epsilon) {
  if (scheme.split && form != Formulation::Primitive) return false;
  if (epsilon == 0.0 && (form == Formulation::Primitive || scheme.split)) return false;
  return epsilon >= 0.0;
}

int default_threads() {
  if (const char* env = std::getenv("PNP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError("PNP_THREADS: expected a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs job(i) for i in [0, n) on up to `threads` workers; results are owned
// per index so the merge order never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& job) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

StabilityMatrix stability_scan(const Problem& problem, const ScanSpec& spec, std::shared_ptr<const FemOperators> ops) {
  if (!ops) ops = problem.build_operators();
  StabilityMatrix m;
  for (const Scheme& s : spec.schemes) {
    for (Formulation f : spec.formulations) {
      for (double eps : spec.epsilons) {
        ScanCell c;
        c.scheme = s;
        c.formulation = f;
        c.epsilon = eps;
        c.applicable = applicable(s, f, eps);
        m.cells.push_back(c);
      }
    }
  }
  const double dt = spec.dt_over_h * ops->h;
  parallel_for(static_cast<int>(m.cells.size()), spec.threads, [&](int i) {
    ScanCell& c = m.cells[i];
    if (!c.applicable) return;
    PhysicalParams p = problem.params;
    p.epsilon = c.epsilon;
    const PnpModel model(c.formulation, p, ops);
    const RunOutcome r = simulate(model, initial_state(problem.initial, model), c.scheme, dt, spec.t_final);
    c.stable = !r.blew_up;
    c.blowup_step = r.blowup_step;
    c.steps = r.steps;
    c.mass_drift = r.mass_drift;
    c.seconds = r.seconds;
  });

  // Within each (scheme, formulation) row, walk ε downwards.
  std::map<std::pair<std::string, int>, std::vector<const ScanCell*>> rows;
  for (const ScanCell& c : m.cells) {
    if (c.applicable) rows[{c.scheme.name(), static_cast<int>(c.formulation)}].push_back(&c);
  }
  for (auto& [key, row] : rows) {
    std::sort(row.begin(), row.end(), [](const ScanCell* a, const ScanCell* b) { return a->epsilon > b->epsilon; });
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i]->stable) continue;
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        if (row[j]->stable) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "%s/%s: unstable at eps=%g but stable at eps=%g", key.first.c_str(),
                        formulation_name(row[i]->formulation).c_str(), row[i]->epsilon, row[j]->epsilon);
          m.monotonicity_violations.emplace_back(buf);
        }
      }
    }
  }
  return m;
}

TimingReport timing_report(const Problem& problem, const std::vector<Formulation>& formulations,
                           const std::vector<double>& epsilons, const Scheme& scheme, double dt_over_h,
                           int iterations, std::shared_ptr<const FemOperators> ops) {
  TimingReport rep;
  rep.scheme = scheme.name();
  rep.iterations = std::max(0, iterations);
  if (rep.iterations == 0) return rep;
  if (!ops) ops = problem.build_operators();
  const double dt = dt_over_h * ops->h;
  for (double eps : epsilons) {
    TimingRow row;
    row.epsilon = eps;
    for (Formulation f : formulations) {
      if (!applicable(scheme, f, eps)) continue;
      PhysicalParams p = problem.params;
      p.epsilon = eps;
      const PnpModel model(f, p, ops);
      // One extra step warms caches and the symbolic factorization.
      const Trajectory tr = advance(model, initial_state(problem.initial, model), dt, rep.iterations + 1, scheme);
      std::vector<double> secs;
      for (const StepRecord& r : tr.records) {
        if (r.step > 1) secs.push_back(r.seconds);
      }
      if (secs.empty()) continue;
      double mean = 0.0;
      for (double s : secs) mean += s;
      mean /= static_cast<double>(secs.size());
      double var = 0.0;
      for (double s : secs) var += (s - mean) * (s - mean);
      const double spread = secs.size() > 1 ? std::sqrt(var / static_cast<double>(secs.size() - 1)) : 0.0;
      if (f == Formulation::Primitive) {
        row.primitive = mean;
        row.primitive_spread = spread;
      } else {
        row.quasi_neutral = mean;
        row.quasi_neutral_spread = spread;
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace pnp
