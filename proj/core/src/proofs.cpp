#include "kondo/proofs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "kondo/gate.hpp"
#include "kondo/metrics.hpp"
#include "kondo/rng.hpp"
#include "kondo/tabular.hpp"

namespace kondo {

namespace {

double entropy(double w) {
  double h = 0.0;
  if (w > 0.0) h -= w * std::log(w);
  if (w < 1.0) h -= (1.0 - w) * std::log1p(-w);
  return h;
}

std::ofstream open_csv(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (name + ".csv"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / (name + ".csv")).string());
  return out;
}

std::string fmt(double v) { return format_double(v); }

ProofResult prove_gate(const std::filesystem::path& dir) {
  ProofResult r{"gate", true, {}};
  auto out = open_csv(dir, "gate");
  out << "chi,lambda,tau,closed_form,brute_force,abs_error,pass\n";
  double worst = 0.0;
  std::size_t n = 0;
  for (int i = 0; i <= 50; ++i) {
    const double chi = -5.0 + 0.2 * i;
    for (int j = 0; j <= 80; ++j) {
      const double lambda = -2.0 + 0.05 * j;
      for (double tau : {0.1, 1.0, 10.0}) {
        const double w = gate_weight(chi, lambda, tau);
        const double b = brute_force_gate(chi, lambda, tau);
        const double err = std::abs(w - b);
        const bool ok = err <= 1e-5;
        r.pass = r.pass && ok;
        worst = std::max(worst, err);
        ++n;
        out << fmt(chi) << ',' << fmt(lambda) << ',' << fmt(tau) << ',' << fmt(w) << ',' << fmt(b) << ','
            << fmt(err) << ',' << ok << '\n';
      }
    }
  }
  r.lines.push_back(std::to_string(n) + " (chi, lambda, tau) triples, max |closed form - brute force| = " +
                    fmt(worst));
  return r;
}

ProofResult prove_lemma1(const std::filesystem::path& dir) {
  ProofResult r{"lemma1", true, {}};
  auto out = open_csv(dir, "lemma1");
  out << "K,p,phi_star_sq,phi_star_sq_closed,inner,inner_closed,cos_incorrect,cos_incorrect_closed,pass\n";
  double worst = 0.0;
  for (std::size_t K : {3, 4, 5, 7, 10, 20, 50, 100, 500, 1000}) {
    for (double p : {0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.99}) {
      const auto g = geometry({.K = K, .correct = 0, .p = p, .b = p});
      const double e = std::max({std::abs(g.phi_star_sq - g.phi_star_sq_closed), std::abs(g.inner - g.inner_closed),
                                 std::abs(g.cos_incorrect - g.cos_incorrect_closed)});
      const bool ok = e <= 1e-12;
      r.pass = r.pass && ok;
      worst = std::max(worst, e);
      out << K << ',' << fmt(p) << ',' << fmt(g.phi_star_sq) << ',' << fmt(g.phi_star_sq_closed) << ','
          << fmt(g.inner) << ',' << fmt(g.inner_closed) << ',' << fmt(g.cos_incorrect) << ','
          << fmt(g.cos_incorrect_closed) << ',' << ok << '\n';
    }
  }
  r.lines.push_back("100 (K, p) points, max closed-form error = " + fmt(worst));
  const double c1 = geometry({.K = 10, .correct = 0, .p = 0.01, .b = 0.01}).cos_incorrect / 0.01;
  const double c4 = geometry({.K = 10, .correct = 0, .p = 0.04, .b = 0.04}).cos_incorrect / 0.04;
  r.lines.push_back("cos(phi(a), grad J)/p at p=0.01: " + fmt(c1) + ", at p=0.04: " + fmt(c4));
  return r;
}

ProofResult prove_prop1(const std::filesystem::path& dir) {
  ProofResult r{"prop1", true, {}};
  auto out = open_csv(dir, "prop1");
  out << "K,p,b,B,cos_mean_kg,var_perp_kg,var_perp_pg,var_perp_pg_closed,expected_backward,pB,keep_failure,pass\n";
  const std::size_t B = 100;
  for (std::size_t K : {3, 10, 100}) {
    for (double p : {0.01, 0.1, 0.3, 0.5, 0.9}) {
      for (double b : {0.1, 0.3, 0.5, 0.9}) {
        const BanditSpec spec{.K = K, .correct = 0, .p = p, .b = b};
        const auto pr = pareto_check(spec, B);
        const auto g = geometry(spec);
        const bool ok = pr.pass && std::abs(g.var_perp_pg - g.var_perp_pg_closed) <= 1e-12;
        r.pass = r.pass && ok;
        out << K << ',' << fmt(p) << ',' << fmt(b) << ',' << B << ',' << fmt(pr.cos_mean_kg) << ','
            << fmt(pr.var_perp_kg) << ',' << fmt(pr.var_perp_pg) << ',' << fmt(g.var_perp_pg_closed) << ','
            << fmt(pr.expected_backward) << ',' << fmt(pr.pB) << ',' << fmt(pr.keep_failure) << ',' << ok << '\n';
      }
    }
  }
  r.lines.push_back("exact enumeration over a 60-point (K, p, b) grid: " + std::string(r.pass ? "pass" : "FAIL"));
  Rng rng(1, Stream::kTest);
  const auto mc = batch_cosine_mc({.K = 10, .correct = 0, .p = 0.01, .b = 0.9}, B, 10000, rng);
  const bool mc_ok = mc.ratio >= 0.5 && mc.ratio <= 2.0 && std::abs(mc.min_cos_kg - 1.0) <= 1e-12;
  r.pass = r.pass && mc_ok;
  r.lines.push_back("batch PG cosine (p=0.01, b=0.9, B=100, 1e4 batches) = " + fmt(mc.mean_cos_pg) +
                    " vs p*sqrt(B) = " + fmt(mc.p_sqrt_B) + " (ratio " + fmt(mc.ratio) + ")");
  r.lines.push_back("gated batch cosine given a keep: min " + fmt(mc.min_cos_kg) + " over " +
                    fmt(mc.keep_fraction * 10000) + " batches");
  return r;
}

ProofResult prove_prop2(const std::filesystem::path& dir) {
  ProofResult r{"prop2", true, {}};
  auto out = open_csv(dir, "prop2");
  out << "K,p,alpha_star,boundary,abs_error,pass\n";
  double worst = 0.0;
  for (std::size_t K : {2, 3, 10, 100, 1000, 50000}) {
    for (double p : {0.05, 0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double a = alpha_star(p, K);
      const double s = separation_boundary(p, K);
      const double e = std::abs(a - s);
      const bool ok = e <= 1e-9;
      r.pass = r.pass && ok;
      worst = std::max(worst, e);
      out << K << ',' << fmt(p) << ',' << fmt(a) << ',' << fmt(s) << ',' << fmt(e) << ',' << ok << '\n';
    }
  }
  r.lines.push_back("separation boundary vs closed form, max error " + fmt(worst));
  for (auto [K, p, want] : {std::tuple{10, 0.5, 0.69}, {100, 0.5, 0.82}, {100, 0.9, 0.87}, {50000, 0.5, 0.92}}) {
    const double a = alpha_star(p, static_cast<std::size_t>(K));
    const bool ok = std::abs(a - want) <= 0.005;
    r.pass = r.pass && ok;
    r.lines.push_back("alpha*(" + std::to_string(K) + ", " + fmt(p) + ") = " + fmt(a) + " (table " + fmt(want) +
                      ")" + (ok ? "" : " FAIL"));
  }
  return r;
}

ProofResult prove_prop3(const std::filesystem::path& dir) {
  ProofResult r{"prop3", true, {}};
  auto out = open_csv(dir, "prop3");
  out << "delta,sigma,eps,draws,probability,standard_error,closed_form,tail_bound,amplification,pass\n";
  Rng base(3, Stream::kTest);
  std::uint32_t point = 0;
  auto row = [&](double delta, double sigma, double eps, std::size_t draws) {
    Rng rng = base.substream(point++);
    const auto g = gambling_check(1.0, delta, sigma, eps, draws, rng);
    out << fmt(delta) << ',' << fmt(sigma) << ',' << fmt(eps) << ',' << draws << ',' << fmt(g.probability) << ','
        << fmt(g.standard_error) << ',' << fmt(g.closed_form) << ',' << fmt(g.tail_bound) << ','
        << fmt(g.amplification) << ',' << g.within_3se << '\n';
    return g;
  };
  const auto slot = row(0.5, 5.0, 0.01, 1000000);
  r.pass = r.pass && slot.within_3se;
  r.lines.push_back("slot machine (Delta=0.5, sigma=5, eps=0.01): Monte Carlo " + fmt(slot.probability) + " +- " +
                    fmt(slot.standard_error) + ", closed form " + fmt(slot.closed_form));
  const auto tight = row(0.5, 0.05, 0.01, 1000000);
  r.pass = r.pass && tight.probability < 1e-6;
  r.lines.push_back("sigma/Delta = 0.1: Monte Carlo " + fmt(tight.probability) + ", tail bound " +
                    fmt(tight.tail_bound));
  for (double delta : {0.1, 0.5, 1.0})
    for (double sigma : {0.5, 1.0, 5.0})
      for (double eps : {0.01, 0.1, 0.3}) r.pass = row(delta, sigma, eps, 100000).within_3se && r.pass;
  return r;
}

}  // namespace

double brute_force_gate(double chi, double lambda, double tau) {
  auto f = [&](double w) { return (chi - lambda) * w + tau * entropy(w); };
  double best = 0.0, best_val = f(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double w = i * 1e-3;
    const double v = f(w);
    if (v > best_val) {
      best_val = v;
      best = w;
    }
  }
  const long lo = std::max(0L, std::lround(best * 1e6) - 2000);
  const long hi = std::min(1000000L, std::lround(best * 1e6) + 2000);
  for (long i = lo; i <= hi; ++i) {
    const double w = static_cast<double>(i) * 1e-6;
    const double v = f(w);
    if (v > best_val) {
      best_val = v;
      best = w;
    }
  }
  return best;
}

ProofResult prove(const std::string& name, const std::filesystem::path& dir) {
  if (name == "gate") return prove_gate(dir);
  if (name == "lemma1") return prove_lemma1(dir);
  if (name == "prop1") return prove_prop1(dir);
  if (name == "prop2") return prove_prop2(dir);
  if (name == "prop3") return prove_prop3(dir);
  throw std::invalid_argument("unknown proposition '" + name + "' (expected gate, lemma1, prop1, prop2, prop3)");
}

}  // namespace kondo
