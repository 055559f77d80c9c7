#include "rbpf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "rbpf/kalman.hpp"
#include "rbpf/rbpf.hpp"
#include "rbpf/scenario_io.hpp"
#include "rbpf/text_io.hpp"

namespace rbpf {

using nlohmann::json;

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kRbpf: return "rbpf";
    case FilterKind::kConventionalPf: return "conventional_pf";
    case FilterKind::kLsFix: return "ls_fix";
  }
  return "unknown";
}

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "rbpf") return FilterKind::kRbpf;
  if (name == "conventional_pf") return FilterKind::kConventionalPf;
  if (name == "ls_fix") return FilterKind::kLsFix;
  throw ParseError("unknown filter '" + name + "' (expected rbpf, conventional_pf or ls_fix)");
}

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  if (!j.is_object()) throw ParseError("run config: expected a JSON object");
  json filter_part = j;
  if (j.contains("init")) {
    const auto mode = j.at("init");
    if (mode == "truth") {
      cfg.init = InitMode::kTruth;
    } else if (mode == "ls_fix") {
      cfg.init = InitMode::kLsFix;
    } else {
      throw ParseError("run config.init: expected 'truth' or 'ls_fix'");
    }
    filter_part.erase("init");
  }
  if (j.contains("prior_sigma_m")) {
    if (!j.at("prior_sigma_m").is_number()) throw ParseError("run config.prior_sigma_m: expected a number");
    cfg.prior_sigma_m = j.at("prior_sigma_m").get<double>();
    if (!(cfg.prior_sigma_m > 0.0)) throw ParseError("run config.prior_sigma_m must be > 0");
    filter_part.erase("prior_sigma_m");
  }
  cfg.filter = filter_config_from_json(filter_part, cfg.filter);
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json j = filter_config_to_json(cfg.filter);
  j["init"] = cfg.init == InitMode::kTruth ? "truth" : "ls_fix";
  j["prior_sigma_m"] = cfg.prior_sigma_m;
  return j;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return run_config_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ErrorSummary summarize_errors(std::vector<double> errors, double threshold) {
  ErrorSummary s;
  s.threshold = threshold;
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  double sum = 0.0, sq = 0.0;
  int under = 0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
    if (e < threshold) ++under;
  }
  s.mean = sum / n;
  s.rmse = std::sqrt(sq / n);
  s.max = errors.back();
  s.fraction_under = under / n;

  auto quantile = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * n));
    return errors[std::clamp<std::size_t>(k, 1, errors.size()) - 1];
  };
  for (double p : {50.0, 68.0, 95.0, 99.0}) s.percentiles.emplace_back(p, quantile(p / 100.0));
  const int points = std::min<int>(100, s.count);
  for (int i = 1; i <= points; ++i) {
    const double q = static_cast<double>(i) / points;
    s.cdf.push_back({quantile(q), q});
  }
  return s;
}

namespace {

struct EpochState {
  FilterEstimate estimate;
  bool position_available = true;
  StepDiagnostics diag;
};

double weight_sum_error(const ParticleSet& set) {
  if (set.particles.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : set.particles) sum += std::exp(p.log_weight);
  return std::abs(sum - 1.0);
}

bool covariances_ok(const ParticleSet& set) {
  for (const auto& p : set.particles) {
    if (!is_spd(p.vel_cov)) return false;
  }
  return true;
}

}  // namespace

RunReport run_filter(const Scenario& sc, FilterKind kind, const RunConfig& cfg) {
  cfg.filter.validate();
  if (sc.epochs.size() != sc.truth.epochs.size()) {
    throw std::invalid_argument("scenario truth and observations differ in length");
  }
  RunReport report;
  RunSummary& sum = report.summary;
  sum.filter = to_string(kind);
  sum.seed = cfg.filter.seed;
  sum.num_particles = kind == FilterKind::kLsFix ? 0 : cfg.filter.num_particles;
  sum.scenario_epochs = static_cast<int>(sc.epochs.size());
  if (sc.epochs.empty()) return report;

  const EcefPosition& base = sc.base();
  EcefPosition prior = sc.truth.epochs.front().position;
  if (cfg.init == InitMode::kLsFix && kind != FilterKind::kLsFix) {
    const auto fix = pseudorange_ls_fix(sc.epochs.front(), base, base);
    if (!fix) throw std::runtime_error("no pseudorange fix at the first epoch to initialize from");
    prior = *fix;
  }

  RbpfFilter rbpf(cfg.filter, base);
  ConventionalPf conventional(cfg.filter, base);
  if (kind == FilterKind::kRbpf) rbpf.initialize(prior, cfg.prior_sigma_m);
  if (kind == FilterKind::kConventionalPf) conventional.initialize(prior, cfg.prior_sigma_m);
  std::optional<EcefPosition> last_fix;

  double previous_spread = -1.0;
  for (std::size_t i = 0; i < sc.epochs.size(); ++i) {
    const EpochObservation& epoch = sc.epochs[i];
    const TruthEpoch& truth = sc.truth.epochs[i];
    EpochState st;
    const ParticleSet* set = nullptr;

    switch (kind) {
      case FilterKind::kRbpf: {
        const StepResult r = rbpf.step(epoch);
        st.estimate = r.estimate;
        st.diag = r.diag;
        set = &rbpf.particles();
        break;
      }
      case FilterKind::kConventionalPf: {
        const StepResult r = conventional.step(epoch);
        st.estimate = r.estimate;
        st.diag = r.diag;
        set = &conventional.particles();
        break;
      }
      case FilterKind::kLsFix: {
        const auto fix = pseudorange_ls_fix(epoch, base, last_fix.value_or(base));
        st.position_available = fix.has_value();
        if (fix) {
          last_fix = fix;
          st.estimate.position = *fix;
          const auto vel = doppler_velocity_ls(epoch, *fix);
          st.estimate.velocity_available = vel.has_value();
          if (vel) st.estimate.velocity = vel->velocity;
        }
        break;
      }
    }

    EpochRecord rec;
    rec.epoch_index = epoch.epoch_index;
    rec.time_s = epoch.time_s;
    rec.truth_position = sc.frame.to_enu(truth.position);
    rec.truth_velocity = sc.frame.rotate_to_enu(truth.velocity);
    rec.position_available = st.position_available;
    rec.velocity_available = st.estimate.velocity_available;
    if (rec.position_available) {
      rec.position = sc.frame.to_enu(st.estimate.position);
      rec.position_error = (rec.position - rec.truth_position).norm();
    }
    if (rec.velocity_available) {
      rec.velocity = sc.frame.rotate_to_enu(st.estimate.velocity);
      rec.velocity_error = (rec.velocity - rec.truth_velocity).norm();
    }
    rec.blocked = epoch.empty();
    rec.num_sats = static_cast<int>(epoch.satellites.size());
    rec.ess = st.diag.ess;
    rec.excluded = st.diag.mean_excluded;
    rec.spread = st.estimate.particle_spread;
    rec.resampled = st.diag.resampled;
    if (set) {
      rec.weight_sum_error = weight_sum_error(*set);
      rec.covariance_ok = covariances_ok(*set);
    }

    sum.singular_updates += st.diag.singular_updates;
    sum.max_weight_sum_error = std::max(sum.max_weight_sum_error, rec.weight_sum_error);
    sum.covariances_ok = sum.covariances_ok && rec.covariance_ok;
    if (set && rec.blocked && previous_spread >= 0.0 && !(rec.spread > previous_spread)) {
      sum.blockage_spread_grows = false;
    }
    previous_spread = set ? rec.spread : -1.0;
    report.epochs.push_back(rec);

    if (set && !(rec.spread <= cfg.filter.divergence_spread_m)) {
      sum.diverged = true;
      sum.diverged_epoch = epoch.epoch_index;
      break;
    }
  }

  std::vector<double> pos, vel;
  int pos_avail = 0, vel_avail = 0;
  for (const auto& r : report.epochs) {
    if (r.position_available) {
      pos.push_back(r.position_error);
      ++pos_avail;
    }
    if (r.velocity_available) {
      vel.push_back(r.velocity_error);
      ++vel_avail;
    }
  }
  sum.num_epochs = static_cast<int>(report.epochs.size());
  sum.position = summarize_errors(std::move(pos), kPositionThreshold);
  sum.velocity = summarize_errors(std::move(vel), kVelocityThreshold);
  const double n = static_cast<double>(sum.num_epochs);
  sum.position_availability = pos_avail / n;
  sum.velocity_availability = vel_avail / n;
  return report;
}

namespace {

constexpr const char* kReportHeader =
    "epoch,time_s,truth_e,truth_n,truth_u,truth_ve,truth_vn,truth_vu,est_e,est_n,est_u,"
    "est_ve,est_vn,est_vu,pos_err_m,vel_err_mps,position_available,velocity_available,blocked,"
    "n_sats,ess,excluded_mean,spread_m,weight_sum_err,cov_ok,resampled";

std::string vec_fields(const Vec3& v, bool present) {
  if (!present) return ",,";
  return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
}

json error_summary_json(const ErrorSummary& s) {
  json j;
  j["count"] = s.count;
  j["rmse"] = s.rmse;
  j["mean"] = s.mean;
  j["max"] = s.max;
  j["threshold"] = s.threshold;
  j["fraction_under_threshold"] = s.fraction_under;
  j["percentiles"] = json::object();
  for (const auto& [p, e] : s.percentiles) j["percentiles"]["p" + std::to_string(int(p))] = e;
  j["cdf"] = json::array();
  for (const auto& c : s.cdf) j["cdf"].push_back({c.error, c.fraction});
  return j;
}

}  // namespace

std::string report_csv(const RunReport& report) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : report.epochs) {
    out += std::to_string(r.epoch_index) + "," + format_double(r.time_s) + "," +
           vec_fields(r.truth_position, true) + "," + vec_fields(r.truth_velocity, true) + "," +
           vec_fields(r.position, r.position_available) + "," +
           vec_fields(r.velocity, r.velocity_available) + "," +
           (r.position_available ? format_double(r.position_error) : "") + "," +
           (r.velocity_available ? format_double(r.velocity_error) : "") + "," +
           (r.position_available ? "1" : "0") + "," + (r.velocity_available ? "1" : "0") + "," +
           (r.blocked ? "1" : "0") + "," + std::to_string(r.num_sats) + "," +
           format_double(r.ess) + "," + format_double(r.excluded) + "," +
           format_double(r.spread) + "," + format_double(r.weight_sum_error) + "," +
           (r.covariance_ok ? "1" : "0") + "," + (r.resampled ? "1" : "0") + "\n";
  }
  return out;
}

json summary_json(const RunSummary& s) {
  json j;
  j["filter"] = s.filter;
  j["seed"] = s.seed;
  j["num_particles"] = s.num_particles;
  j["num_epochs"] = s.num_epochs;
  j["scenario_epochs"] = s.scenario_epochs;
  j["position"] = error_summary_json(s.position);
  j["velocity"] = error_summary_json(s.velocity);
  j["position_availability"] = s.position_availability;
  j["velocity_availability"] = s.velocity_availability;
  j["diverged"] = s.diverged;
  j["diverged_epoch"] = s.diverged_epoch;
  j["singular_updates"] = s.singular_updates;
  j["max_weight_sum_error"] = s.max_weight_sum_error;
  j["covariances_ok"] = s.covariances_ok;
  j["blockage_spread_grows"] = s.blockage_spread_grows;
  return j;
}

void write_report(const std::filesystem::path& dir, const std::string& stem,
                  const RunReport& report) {
  write_text_file(dir / (stem + "_epochs.csv"), report_csv(report));
  write_text_file(dir / (stem + "_summary.json"), summary_json(report.summary).dump(2) + "\n");
}

ReportErrors read_report_errors(const std::filesystem::path& csv) {
  ReportErrors out;
  for_each_csv_row(csv, kReportHeader, [&](const std::vector<std::string_view>& f, int) {
    if (f.size() != 26) throw ParseError("expected 26 columns, got " + std::to_string(f.size()));
    out.epochs.push_back(static_cast<int>(parse_int(f[0])));
    const bool pa = parse_int(f[16]) != 0;
    const bool va = parse_int(f[17]) != 0;
    out.position_available.push_back(pa);
    out.velocity_available.push_back(va);
    out.position_error.push_back(pa ? parse_double(f[14]) : 0.0);
    out.velocity_error.push_back(va ? parse_double(f[15]) : 0.0);
  });
  return out;
}

namespace {

std::vector<double> available(const std::vector<double>& v, const std::vector<bool>& mask) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask[i]) out.push_back(v[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Empirical CDF P(e <= x) of sorted samples.
double ecdf(const std::vector<double>& sorted, double x) {
  if (sorted.empty()) return 0.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double fraction_under(const std::vector<double>& sorted, double threshold) {
  if (sorted.empty()) return 0.0;
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

Comparison compare_reports(const ReportErrors& a, const ReportErrors& b) {
  const std::size_t n = std::min(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a.epochs[i] != b.epochs[i]) {
      throw std::invalid_argument("reports differ at row " + std::to_string(i + 1) + ": epoch " +
                                  std::to_string(a.epochs[i]) + " vs " +
                                  std::to_string(b.epochs[i]));
    }
  }
  if (a.epochs.size() != b.epochs.size()) {
    const auto& longer = a.epochs.size() > b.epochs.size() ? a.epochs : b.epochs;
    throw std::invalid_argument("reports cover " + std::to_string(a.epochs.size()) + " and " +
                                std::to_string(b.epochs.size()) +
                                " epochs; first unmatched epoch " + std::to_string(longer[n]));
  }

  Comparison out;
  out.cdf_csv = "metric,error,cdf_a,cdf_b,delta\n";
  out.summary_csv = "metric,a,b,delta\n";
  auto add_summary = [&](const std::string& name, double va, double vb) {
    out.summary_csv += name + "," + format_double(va) + "," + format_double(vb) + "," +
                       format_double(va - vb) + "\n";
  };
  struct Metric {
    const char* name;
    const std::vector<double>& ea;
    const std::vector<bool>& ma;
    const std::vector<double>& eb;
    const std::vector<bool>& mb;
    double threshold;
  };
  const Metric metrics[] = {
      {"position", a.position_error, a.position_available, b.position_error,
       b.position_available, kPositionThreshold},
      {"velocity", a.velocity_error, a.velocity_available, b.velocity_error,
       b.velocity_available, kVelocityThreshold},
  };
  for (const Metric& m : metrics) {
    const std::vector<double> sa = available(m.ea, m.ma);
    const std::vector<double> sb = available(m.eb, m.mb);
    std::set<double> levels(sa.begin(), sa.end());
    levels.insert(sb.begin(), sb.end());
    for (double x : levels) {
      const double ca = ecdf(sa, x), cb = ecdf(sb, x);
      out.cdf_csv += std::string(m.name) + "," + format_double(x) + "," + format_double(ca) +
                     "," + format_double(cb) + "," + format_double(ca - cb) + "\n";
    }
    const std::string name = m.name;
    add_summary(name + "_fraction_under_" + format_double(m.threshold),
                fraction_under(sa, m.threshold), fraction_under(sb, m.threshold));
    add_summary(name + "_rmse", rms(sa), rms(sb));
    const double na = static_cast<double>(m.ma.size());
    add_summary(name + "_availability", na > 0 ? sa.size() / na : 0.0,
                na > 0 ? sb.size() / na : 0.0);
  }
  return out;
}

std::string SweepReport::cells_csv() const {
  std::string out =
      "filter,num_particles,seed,position_fraction_under_0.3,position_rmse_m,"
      "velocity_fraction_under_0.1,velocity_availability,diverged,error\n";
  for (const auto& c : cells) {
    out += to_string(c.filter) + "," + std::to_string(c.num_particles) + "," +
           std::to_string(c.seed) + ",";
    if (c.summary) {
      const auto& s = *c.summary;
      out += format_double(s.position.fraction_under) + "," + format_double(s.position.rmse) +
             "," + format_double(s.velocity.fraction_under) + "," +
             format_double(s.velocity_availability) + "," + (s.diverged ? "1" : "0") + ",";
    } else {
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += ",,,,," + msg;
    }
    out += "\n";
  }
  return out;
}

std::string SweepReport::csv() const {
  std::string out = "filter,num_particles,runs,mean_fraction_under_0.3,std_fraction_under_0.3\n";
  for (const auto& r : rows) {
    out += to_string(r.filter) + "," + std::to_string(r.num_particles) + "," +
           std::to_string(r.runs) + "," + format_double(r.mean_fraction) + "," +
           format_double(r.std_fraction) + "\n";
  }
  return out;
}

SweepReport particle_sweep(const std::function<Scenario(std::uint64_t)>& scenario_for_seed,
                           const std::vector<int>& counts, const std::vector<std::uint64_t>& seeds,
                           const RunConfig& cfg) {
  if (counts.empty()) throw std::invalid_argument("sweep needs at least one particle count");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  for (int n : counts) {
    if (n < 1) throw std::invalid_argument("particle counts must be >= 1, got " + std::to_string(n));
  }

  SweepReport report;
  const FilterKind kinds[] = {FilterKind::kRbpf, FilterKind::kConventionalPf};
  for (std::uint64_t seed : seeds) {
    std::optional<Scenario> sc;
    std::string scenario_error;
    try {
      sc = scenario_for_seed(seed);
    } catch (const std::exception& e) {
      scenario_error = e.what();
    }
    for (FilterKind kind : kinds) {
      for (int n : counts) {
        SweepCell cell{kind, n, seed, std::nullopt, scenario_error};
        if (sc) {
          RunConfig run = cfg;
          run.filter.num_particles = n;
          run.filter.seed = seed;
          try {
            cell.summary = run_filter(*sc, kind, run).summary;
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  for (FilterKind kind : kinds) {
    for (int n : counts) {
      std::vector<double> fr;
      for (const auto& c : report.cells) {
        if (c.filter == kind && c.num_particles == n && c.summary) {
          fr.push_back(c.summary->position.fraction_under);
        }
      }
      SweepRow row{kind, n, static_cast<int>(fr.size()), 0.0, 0.0};
      if (!fr.empty()) {
        double s = 0.0;
        for (double f : fr) s += f;
        row.mean_fraction = s / fr.size();
        double v = 0.0;
        for (double f : fr) v += (f - row.mean_fraction) * (f - row.mean_fraction);
        row.std_fraction = fr.size() > 1 ? std::sqrt(v / (fr.size() - 1)) : 0.0;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

std::vector<GridCell> grid_likelihood_map(const Scenario& sc, int epoch_index,
                                          const EnuVector& center, double extent_m,
                                          double spacing_m, const LikelihoodOptions& opts) {
  if (!(spacing_m > 0.0)) throw std::invalid_argument("grid spacing must be > 0");
  if (!(extent_m >= 0.0)) throw std::invalid_argument("grid extent must be >= 0");
  const double half = std::round(extent_m / (2.0 * spacing_m));
  const double side = 2.0 * half + 1.0;
  if (!(side * side <= static_cast<double>(kMaxGridCells))) {
    throw std::invalid_argument("grid of " + format_double(side) + "^2 cells exceeds " +
                                std::to_string(kMaxGridCells) +
                                "; use a coarser spacing or a smaller extent");
  }
  const EpochObservation* epoch = nullptr;
  for (const auto& e : sc.epochs) {
    if (e.epoch_index == epoch_index) epoch = &e;
  }
  if (!epoch) throw std::invalid_argument("scenario has no epoch " + std::to_string(epoch_index));

  const auto h = static_cast<long long>(half);
  std::vector<GridCell> cells;
  cells.reserve(static_cast<std::size_t>(side * side));
  for (long long j = -h; j <= h; ++j) {
    for (long long i = -h; i <= h; ++i) {
      GridCell c{static_cast<double>(i) * spacing_m, static_cast<double>(j) * spacing_m, 0.0};
      const EcefPosition p = sc.frame.to_ecef(center + EnuVector(c.east, c.north, 0.0));
      const LikelihoodResult lr = particle_likelihood(*epoch, p, sc.base(), opts);
      c.log_likelihood = lr.usable() ? lr.log_likelihood : -std::numeric_limits<double>::infinity();
      cells.push_back(c);
    }
  }
  return cells;
}

std::string grid_csv(const std::vector<GridCell>& cells) {
  std::string out = "east_m,north_m,log_likelihood\n";
  for (const auto& c : cells) {
    out += format_double(c.east) + "," + format_double(c.north) + "," +
           (std::isfinite(c.log_likelihood) ? format_double(c.log_likelihood) : "-inf") + "\n";
  }
  return out;
}

}  // namespace rbpf
