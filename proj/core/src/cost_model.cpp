#include <dfgm/cost_model.hpp>

#include <dfgm/types.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace dfgm {

namespace {

Cycles ceil_div(Cycles a, Cycles b) { return (a + b - 1) / b; }

Cycles ceil_log2(Cycles u) {
  if (u <= 1) return 0;
  return static_cast<Cycles>(std::bit_width(static_cast<std::uint64_t>(u - 1)));
}

Cycles effective_unroll(Cycles unroll, Cycles q) {
  const Cycles u = unroll == kUnrollFull ? q : unroll;
  return std::clamp<Cycles>(u, 1, q);
}

// Critical-path depth of one row's reduction: the first chunk pays the
// multiplier plus the adder tree, each further chunk chains one more
// multiply-add stage.
Cycles row_body_depth(Cycles q, Cycles u, const KernelConfig& cfg) {
  const Cycles chunks = ceil_div(q, u);
  return cfg.L_mul + ceil_log2(u) * cfg.L_add + (chunks - 1) * (cfg.L_mul + cfg.L_add);
}

}  // namespace

void validate_config(const KernelConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("KernelConfig: ") + what);
  };
  require(cfg.L_mul >= 1, "L_mul must be >= 1");
  require(cfg.L_add >= 1, "L_add must be >= 1");
  require(cfg.unroll >= 0, "unroll must be >= 1 (or 0 for full)");
  require(cfg.II >= 0, "II must be >= 0");
  require(cfg.row_par >= 1, "row_par must be >= 1");
  require(cfg.c_loop >= 0, "c_loop must be >= 0");
  require(cfg.c_fixed >= 0, "c_fixed must be >= 0");
  require(cfg.c_vec >= 0, "c_vec must be >= 0");
}

Cycles estimate_matvec_cycles(Cycles rows, Cycles cols, const KernelConfig& cfg) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("estimate_matvec_cycles: dims must be >= 1");
  validate_config(cfg);

  const Cycles p = rows;
  const Cycles q = cols;
  const Cycles u = effective_unroll(cfg.unroll, q);
  const Cycles body = row_body_depth(q, u, cfg);

  if (cfg.II == 0) {
    if (u == 1) return p * (q * (cfg.L_mul + cfg.L_add + cfg.c_loop) + cfg.c_loop) + cfg.c_fixed;
    const Cycles chunks = ceil_div(q, u);
    return p * (body + chunks * cfg.c_loop + cfg.c_loop) + cfg.c_fixed;
  }

  const Cycles rp = std::clamp<Cycles>(cfg.row_par, 1, p);
  return body + (ceil_div(p, rp) - 1) * cfg.II + cfg.c_fixed;
}

Cycles estimate_iteration_cycles(Cycles n, Cycles m, const KernelConfig& cfg) {
  if (n < 1 || m < 1) throw std::invalid_argument("estimate_iteration_cycles: dims must be >= 1");
  return estimate_matvec_cycles(n, m, cfg) + estimate_matvec_cycles(m, n, cfg) +
         cfg.c_vec * (n + m);
}

Cycles estimate_solve_cycles(Cycles iters, Cycles n, Cycles m, const KernelConfig& cfg,
                             Cycles c_pro, Cycles c_epi) {
  if (iters < 1) throw std::invalid_argument("estimate_solve_cycles: iters must be >= 1");
  return sample_cycles(iters, estimate_iteration_cycles(n, m, cfg), c_pro, c_epi);
}

Cycles sample_cycles(Cycles iters, Cycles iter_cycles, Cycles c_pro, Cycles c_epi) {
  return iters * iter_cycles + c_pro + c_epi;
}

ResourceEstimate estimate_resources(Cycles n, Cycles m, const KernelConfig& cfg) {
  validate_config(cfg);
  const Cycles widest = std::max(n, m);
  const Cycles u = cfg.unroll == kUnrollFull ? widest : cfg.unroll;
  ResourceEstimate r;
  r.mults = u * cfg.row_par;
  r.adders = (u - 1) * cfg.row_par;
  r.mem_banks = u * cfg.row_par;
  return r;
}

CycleReport estimate_report(Cycles iters, Cycles n, Cycles m, const KernelConfig& cfg,
                            Cycles c_pro, Cycles c_epi) {
  CycleReport rep;
  rep.iter_cycles = estimate_iteration_cycles(n, m, cfg);
  rep.solve_cycles = sample_cycles(iters, rep.iter_cycles, c_pro, c_epi);
  const ResourceEstimate res = estimate_resources(n, m, cfg);
  rep.mults = res.mults;
  rep.adders = res.adders;
  rep.mem_banks = res.mem_banks;
  return rep;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Cycles parse_cycles(std::string_view v, int line) {
  Cycles value = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ParseError(line, "non-numeric value '" + std::string(v) + "'");
  return value;
}

}  // namespace

EstimatorSettings load_estimator_settings(std::string_view text) {
  EstimatorSettings s;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));

    if (key == "L_mul") s.config.L_mul = parse_cycles(val, line_no);
    else if (key == "L_add") s.config.L_add = parse_cycles(val, line_no);
    else if (key == "unroll") s.config.unroll = (val == "full") ? kUnrollFull : parse_cycles(val, line_no);
    else if (key == "II") s.config.II = parse_cycles(val, line_no);
    else if (key == "row_par") s.config.row_par = parse_cycles(val, line_no);
    else if (key == "c_loop") s.config.c_loop = parse_cycles(val, line_no);
    else if (key == "c_fixed") s.config.c_fixed = parse_cycles(val, line_no);
    else if (key == "c_vec") s.config.c_vec = parse_cycles(val, line_no);
    else if (key == "iters") s.iters = parse_cycles(val, line_no);
    else if (key == "c_pro") s.c_pro = parse_cycles(val, line_no);
    else if (key == "c_epi") s.c_epi = parse_cycles(val, line_no);
    else throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
  }
  validate_config(s.config);
  if (s.iters < 1) throw std::invalid_argument("iters must be >= 1");
  if (s.c_pro < 0 || s.c_epi < 0) throw std::invalid_argument("c_pro/c_epi must be >= 0");
  return s;
}

std::string save_estimator_settings(const EstimatorSettings& s) {
  std::ostringstream out;
  out << "L_mul = " << s.config.L_mul << '\n';
  out << "L_add = " << s.config.L_add << '\n';
  if (s.config.unroll == kUnrollFull)
    out << "unroll = full\n";
  else
    out << "unroll = " << s.config.unroll << '\n';
  out << "II = " << s.config.II << '\n';
  out << "row_par = " << s.config.row_par << '\n';
  out << "c_loop = " << s.config.c_loop << '\n';
  out << "c_fixed = " << s.config.c_fixed << '\n';
  out << "c_vec = " << s.config.c_vec << '\n';
  out << "iters = " << s.iters << '\n';
  out << "c_pro = " << s.c_pro << '\n';
  out << "c_epi = " << s.c_epi << '\n';
  return out.str();
}

namespace {

double rel_error(double value, double target) { return std::abs(value / target - 1.0); }

}  // namespace

std::optional<Calibration> calibrate(const CalibrationTargets& targets) {
  std::optional<Calibration> best;

  const std::array<Cycles, 4> unroll_grid = {2, 4, 8, kUnrollFull};
  const std::array<Cycles, 10> rp_grid = {2, 3, 4, 6, 8, 12, 16, 24, 32, 48};

  for (Cycles n = 2; n <= 32; ++n) {
    for (Cycles m = 2; m <= 48; ++m) {
      const double s1 = 2.0 * static_cast<double>(n * m);
      const Cycles vecs = n + m;
      for (Cycles cv = 1; cv <= 4; ++cv) {
        for (Cycles cl = 0; cl <= 8; ++cl) {
          // naive = 2nm*(L_mul+L_add) + 2nm*c_loop + (n+m)*(c_loop+c_vec);
          // bracket L_mul+L_add by the naive tolerance band.
          const double fixed = s1 * static_cast<double>(cl) +
                               static_cast<double>(vecs) * static_cast<double>(cl + cv);
          const double lo_t = targets.naive * (1.0 - targets.tolerance);
          const double hi_t = targets.naive * (1.0 + targets.tolerance);
          const Cycles sum_lo = std::max<Cycles>(2, static_cast<Cycles>(std::ceil((lo_t - fixed) / s1)));
          const Cycles sum_hi = std::min<Cycles>(32, static_cast<Cycles>(std::floor((hi_t - fixed) / s1)));
          for (Cycles sum = sum_lo; sum <= sum_hi; ++sum) {
            for (Cycles lm = std::max<Cycles>(1, sum - 16); lm <= std::min<Cycles>(16, sum - 1); ++lm) {
              const Cycles la = sum - lm;
              KernelConfig base;
              base.L_mul = lm;
              base.L_add = la;
              base.c_loop = cl;
              base.c_vec = cv;

              KernelConfig naive_cfg = base;  // unroll=1, II=0, row_par=1
              const Cycles naive_cycles = estimate_iteration_cycles(n, m, naive_cfg);
              if (rel_error(static_cast<double>(naive_cycles), targets.naive) > targets.tolerance)
                continue;

              for (const Cycles u : unroll_grid) {
                KernelConfig a_cfg = base;
                a_cfg.unroll = u;
                a_cfg.II = 1;
                const Cycles bodies = estimate_matvec_cycles(n, m, a_cfg) -
                                      (ceil_div(n, 1) - 1) +
                                      estimate_matvec_cycles(m, n, a_cfg) - (ceil_div(m, 1) - 1);
                // A(II) = bodies + (n-1 + m-1)*II + (n+m)*c_vec; solve for II.
                const Cycles row_trips = (n - 1) + (m - 1);
                const double vec_cost = static_cast<double>(cv * vecs);
                const double want = targets.opt_a - static_cast<double>(bodies) - vec_cost;
                if (row_trips == 0) continue;
                const Cycles ii_mid = static_cast<Cycles>(
                    std::llround(want / static_cast<double>(row_trips)));
                for (Cycles ii = std::max<Cycles>(1, ii_mid - 1); ii <= std::max<Cycles>(1, ii_mid + 1);
                     ++ii) {
                  a_cfg.II = ii;
                  const Cycles a_cycles = estimate_iteration_cycles(n, m, a_cfg);
                  if (rel_error(static_cast<double>(a_cycles), targets.opt_a) > targets.tolerance)
                    continue;
                  const double speed_na =
                      static_cast<double>(naive_cycles) / static_cast<double>(a_cycles);
                  if (speed_na < targets.min_speedup_naive_a) continue;

                  for (const Cycles rp : rp_grid) {
                    if (rp > std::max(n, m)) break;
                    KernelConfig b_cfg = a_cfg;
                    b_cfg.row_par = rp;
                    const Cycles b_cycles = estimate_iteration_cycles(n, m, b_cfg);
                    if (rel_error(static_cast<double>(b_cycles), targets.opt_b) > targets.tolerance)
                      continue;
                    const double speed_ab =
                        static_cast<double>(a_cycles) / static_cast<double>(b_cycles);
                    if (speed_ab < targets.min_speedup_a_b) continue;

                    const double err = std::max(
                        {rel_error(static_cast<double>(naive_cycles), targets.naive),
                         rel_error(static_cast<double>(a_cycles), targets.opt_a),
                         rel_error(static_cast<double>(b_cycles), targets.opt_b)});
                    if (!best || err < best->max_rel_error) {
                      Calibration c;
                      c.n = n;
                      c.m = m;
                      c.naive_cfg = naive_cfg;
                      c.opt_a_cfg = a_cfg;
                      c.opt_b_cfg = b_cfg;
                      c.naive_cycles = naive_cycles;
                      c.opt_a_cycles = a_cycles;
                      c.opt_b_cycles = b_cycles;
                      c.max_rel_error = err;
                      c.speedup_naive_a = speed_na;
                      c.speedup_a_b = speed_ab;
                      best = c;
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return best;
}

Calibration default_calibration() {
  // Frozen output of calibrate() with the default targets; see the
  // calibrate tool. Re-derive with `dfgm calibrate` if the model changes.
  // The per-iteration estimates come out at 8992 / 1002 / 237 cycles.
  Calibration c;
  c.n = 4;
  c.m = 44;
  KernelConfig base;
  base.L_mul = 16;
  base.L_add = 6;
  base.c_loop = 3;
  base.c_vec = 1;
  c.naive_cfg = base;
  c.opt_a_cfg = base;
  c.opt_a_cfg.unroll = 8;
  c.opt_a_cfg.II = 17;
  c.opt_b_cfg = c.opt_a_cfg;
  c.opt_b_cfg.row_par = 24;
  c.naive_cycles = estimate_iteration_cycles(c.n, c.m, c.naive_cfg);
  c.opt_a_cycles = estimate_iteration_cycles(c.n, c.m, c.opt_a_cfg);
  c.opt_b_cycles = estimate_iteration_cycles(c.n, c.m, c.opt_b_cfg);
  c.max_rel_error = std::max({rel_error(static_cast<double>(c.naive_cycles), 9000.0),
                              rel_error(static_cast<double>(c.opt_a_cycles), 1000.0),
                              rel_error(static_cast<double>(c.opt_b_cycles), 237.0)});
  c.speedup_naive_a = static_cast<double>(c.naive_cycles) / static_cast<double>(c.opt_a_cycles);
  c.speedup_a_b = static_cast<double>(c.opt_a_cycles) / static_cast<double>(c.opt_b_cycles);
  return c;
}

}  // namespace dfgm
