#include <doctest.h>

#include <cmath>
#include <vector>

#include "con2da/errors.hpp"
#include "con2da/gradcheck.hpp"
#include "con2da/kernels.hpp"
#include "con2da/ops.hpp"
#include "con2da/optim.hpp"
#include "con2da/rng.hpp"
#include "con2da/tensor.hpp"
#include "oracles.hpp"

using namespace con2da;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, bool requires_grad = false) {
  return Tensor::matrix(r, c, random_values(r * c, seed), requires_grad);
}

}  // namespace

TEST_CASE("l2_normalize examples") {
  auto row = [](std::vector<double> v) {
    const std::size_t n = v.size();
    return l2_normalize(Tensor::matrix(1, n, std::move(v)));
  };
  const Tensor a = row({1, 0, 0});
  CHECK(a.at(0, 0) == 1.0);
  CHECK(a.at(0, 1) == 0.0);
  const Tensor b = row({3, 4});
  CHECK(b.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.at(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  const Tensor c = row({5, 0});
  CHECK(c.at(0, 0) == 1.0);
  CHECK(c.at(0, 1) == 0.0);
  CHECK_THROWS_AS(row({0, 0}), DegenerateInput);
  CHECK_THROWS_AS(row({1e-13, 0}), DegenerateInput);
}

TEST_CASE("l2_normalize yields unit rows") {
  const Tensor z = l2_normalize(random_matrix(16, 9, 3));
  for (std::size_t i = 0; i < 16; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 9; ++j) s += z.at(i, j) * z.at(i, j);
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax_with_temperature examples") {
  for (double c : {-3.0, 0.0, 7.5}) {
    for (double t : {0.05, 1.0, 2.0}) {
      const Tensor p = softmax_with_temperature(Tensor::matrix(1, 3, {c, c, c}), t);
      for (std::size_t j = 0; j < 3; ++j) CHECK(p.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  const Tensor p = softmax_with_temperature(Tensor::matrix(1, 2, {1, 0}), 1.0);
  const double e = std::exp(1.0);
  CHECK(std::abs(p.at(0, 0) - e / (e + 1.0)) < 1e-12);
  CHECK(std::abs(p.at(0, 0) - 0.73106) < 1e-4);
  CHECK(std::abs(p.at(0, 1) - 0.26894) < 1e-4);

  const Tensor sharp = softmax_with_temperature(Tensor::matrix(1, 2, {1, 0}), 0.05);
  CHECK(sharp.at(0, 0) > sharp.at(0, 1));
  CHECK(sharp.at(0, 0) > 0.999999);
  CHECK(std::abs(sharp.at(0, 0) - std::exp(20.0) / (std::exp(20.0) + 1.0)) < 1e-15);
  CHECK_THROWS_AS(softmax_with_temperature(Tensor::matrix(1, 2, {1, 0}), 0.0), InvalidHyperparameter);
}

TEST_CASE("softmax rows sum to one and match the oracle, even for large logits") {
  const Tensor logits = Tensor::matrix(4, 5, random_values(20, 8, -400.0, 400.0));
  for (double t : {0.05, 0.5, 1.0}) {
    const Tensor p = softmax_with_temperature(logits, t);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::isfinite(p.at(i, j)));
        s += p.at(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  const Tensor small = Tensor::matrix(2, 3, random_values(6, 9));
  const Tensor p = softmax_with_temperature(small, 0.7);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto ref = oracle::softmax({small.at(i, 0), small.at(i, 1), small.at(i, 2)}, 0.7L);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(p.at(i, j) - static_cast<double>(ref[j])) < 1e-14);
  }
}

TEST_CASE("cross_entropy examples") {
  const int label0[] = {0};
  const int label2[] = {2};
  CHECK(cross_entropy(Tensor::matrix(1, 3, {0, 0, 1}), label2).item() == 0.0);
  for (int k = 0; k < 4; ++k) {
    const int l[] = {k};
    CHECK(cross_entropy(Tensor::matrix(1, 4, {0.25, 0.25, 0.25, 0.25}), l).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  const double v = cross_entropy(Tensor::matrix(1, 2, {0.98, 0.02}), label0).item();
  CHECK(std::abs(v - 0.020203) < 1e-5);
  CHECK(std::abs(v + std::log(0.98)) < 1e-15);
}

TEST_CASE("cross_entropy clamps zero probabilities and counts them") {
  NumericDiagnostics diag;
  const int label[] = {1};
  const double v = cross_entropy(Tensor::matrix(1, 2, {1.0, 0.0}), label, &diag).item();
  CHECK(v == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK(diag.clamp_count == 1);
  const int bad[] = {5};
  CHECK_THROWS_AS(cross_entropy(Tensor::matrix(1, 2, {0.5, 0.5}), bad), ContractViolation);
}

TEST_CASE("serial and parallel kernels agree with the long-double oracle") {
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 5, 3}, {33, 17, 65}, {64, 128, 32}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_values(m * k, 1 + m);
    const auto b = random_values(k * n, 2 + n);
    const auto ref = oracle::matmul(a, b, m, k, n);
    std::vector<double> cs(m * n), cp(m * n);
    kernels::serial::matmul(a, b, cs, m, k, n);
    kernels::parallel::matmul(a, b, cp, m, k, n);
    CHECK(cs == cp);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(std::abs(cs[i] - ref[i]) < 1e-12);

    // a^T stored as [k, m]; b^T stored as [n, k].
    std::vector<double> at(k * m), bt(n * k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    std::vector<double> tn_s(m * n), tn_p(m * n), nt_s(m * n), nt_p(m * n);
    kernels::serial::matmul_tn(at, b, tn_s, m, k, n);
    kernels::parallel::matmul_tn(at, b, tn_p, m, k, n);
    kernels::serial::matmul_nt(a, bt, nt_s, m, k, n);
    kernels::parallel::matmul_nt(a, bt, nt_p, m, k, n);
    CHECK(tn_s == tn_p);
    CHECK(nt_s == nt_p);
    for (std::size_t i = 0; i < m * n; ++i) {
      CHECK(std::abs(tn_s[i] - ref[i]) < 1e-12);
      CHECK(std::abs(nt_s[i] - ref[i]) < 1e-12);
    }
  }
}

TEST_CASE("serial and parallel Adam kernels are bit-identical") {
  const std::size_t n = 10007;
  auto p_s = random_values(n, 1), p_p = p_s;
  const auto g = random_values(n, 2);
  std::vector<double> m_s(n), v_s(n), m_p(n), v_p(n);
  for (int t = 1; t <= 3; ++t) {
    const kernels::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 1.0 - std::pow(0.9, t), 1.0 - std::pow(0.999, t)};
    kernels::serial::adam_update(p_s, g, m_s, v_s, c);
    kernels::parallel::adam_update(p_p, g, m_p, v_p, c);
  }
  CHECK(p_s == p_p);
  CHECK(m_s == m_p);
  CHECK(v_s == v_p);
}

TEST_CASE("adam_step examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor w = Tensor::matrix(1, 3, {0.5, -1.0, 2.0}, true);
    AdamState st;
    const std::vector<double> zero(3, 0.0);
    for (int i = 0; i < 5; ++i) adam_step(w, zero, st, 0.1);
    CHECK(w.values()[0] == 0.5);
    CHECK(w.values()[1] == -1.0);
    CHECK(w.values()[2] == 2.0);
  }
  SUBCASE("first step moves each coordinate by about lr regardless of gradient scale") {
    for (double g : {1e-4, 0.3, 5.0, 1e4, -2.0}) {
      Tensor w = Tensor::matrix(1, 1, {1.0}, true);
      AdamState st;
      const double lr = 0.01;
      adam_step(w, std::vector<double>{g}, st, lr);
      oracle::ScalarAdam ref;
      const long double expected = ref.step(1.0L, g, lr);
      CHECK(std::abs(w.values()[0] - static_cast<double>(expected)) < 1e-15);
      const double delta = std::abs(w.values()[0] - 1.0);
      CHECK(delta <= lr);
      CHECK(delta == doctest::Approx(lr * std::abs(g) / (std::abs(g) + 1e-8)).epsilon(1e-9));
    }
  }
  SUBCASE("minimizes a quadratic like the reference implementation") {
    Tensor w = Tensor::matrix(1, 1, {0.0}, true);
    AdamState st;
    oracle::ScalarAdam ref;
    long double w_ref = 0.0L;
    for (int i = 0; i < 200; ++i) {
      const double g = 2.0 * (w.values()[0] - 3.0);
      adam_step(w, std::vector<double>{g}, st, 0.1);
      w_ref = ref.step(w_ref, 2.0L * (w_ref - 3.0L), 0.1L);
    }
    CHECK(std::abs(w.values()[0] - 3.0) < 0.05);
    CHECK(std::abs(w.values()[0] - static_cast<double>(w_ref)) < 1e-9);
  }
  SUBCASE("mismatched moment buffers are rejected") {
    Tensor w = Tensor::matrix(1, 2, {0.0, 0.0}, true);
    AdamState st;
    adam_step(w, std::vector<double>{1.0, 1.0}, st, 0.1);
    Tensor other = Tensor::matrix(1, 3, {0.0, 0.0, 0.0}, true);
    CHECK_THROWS_AS(adam_step(other, std::vector<double>{1.0, 1.0, 1.0}, st, 0.1), ContractViolation);
  }
}

TEST_CASE("Adam optimizer skips parameters without a gradient") {
  Tensor a = Tensor::matrix(1, 2, {1.0, 2.0}, true);
  Tensor b = Tensor::matrix(1, 2, {3.0, 4.0}, true);
  Adam opt({a, b});
  opt.zero_grad();
  sum(mul(a, a)).backward();
  opt.step(0.1);
  CHECK(a.values()[0] != 1.0);
  CHECK(b.values()[0] == 3.0);
  CHECK(b.values()[1] == 4.0);
  CHECK(opt.states()[1].step_count == 0);
}

TEST_CASE("cosine_decay examples") {
  const LrSchedule s;
  CHECK(cosine_decay(s, 0) == 0.00008);
  CHECK(cosine_decay(s, 5000) == 0.0);
  CHECK(std::abs(cosine_decay(s, 2500) - 0.00004) < 1e-18);
  double prev = cosine_decay(s, 0);
  for (std::uint64_t t = 1; t <= 5000; ++t) {
    const double cur = cosine_decay(s, t);
    CHECK(cur <= prev);
    CHECK(cur >= 0.0);
    prev = cur;
  }
  CHECK_THROWS_AS(cosine_decay(s, 6000), ContractViolation);
}

TEST_CASE("check_gradients examples") {
  SUBCASE("sum of squares") {
    Tensor p = random_matrix(3, 4, 11, true);
    std::vector<Tensor> params{p};
    const auto r = check_gradients([&] { return sum(mul(p, p)); }, params, 1e-5, 1e-7);
    CHECK(r.passed);
    CHECK(r.max_relative_error < 1e-7);
  }
  SUBCASE("cross entropy of a tempered softmax") {
    Tensor logits = random_matrix(4, 3, 12, true);
    const int labels[] = {0, 2, 1, 2};
    std::vector<Tensor> params{logits};
    const auto r = check_gradients(
        [&] { return cross_entropy(softmax_with_temperature(logits, 0.7), labels); }, params, 1e-6, 1e-5);
    CHECK(r.passed);
    CHECK(r.max_relative_error < 1e-5);
  }
  SUBCASE("a wrong gradient is detected") {
    Tensor p = random_matrix(2, 2, 13, true);
    std::vector<Tensor> params{p};
    // Multiplying by a detached copy hides one factor from the analytic gradient.
    const auto r = check_gradients([&] { return sum(mul(p, p.detach())); }, params, 1e-5, 1e-4);
    CHECK_FALSE(r.passed);
  }
}

TEST_CASE("op gradients match finite differences") {
  Tensor a = random_matrix(3, 4, 21, true);
  Tensor b = random_matrix(4, 5, 22, true);
  std::vector<Tensor> ab{a, b};
  auto r = check_gradients(
      [&] {
        Tensor y = matmul(a, b);
        Tensor t = transpose(y);
        Tensor s = slice_rows(concat_rows(std::vector<Tensor>{t, t}), 1, 6);
        std::vector<std::size_t> idx{0, 1, 2, 0, 1};
        return add(sum(gather_columns(s, idx)), mean(log_clamped(softmax_with_temperature(y, 0.5), 1e-12)));
      },
      ab, 1e-6, 1e-6);
  CHECK(r.passed);

  Tensor x = random_matrix(3, 4, 24, true);
  std::vector<Tensor> xs{x};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 1};
  r = check_gradients([&] { return sum(masked_logsumexp_rows(x, mask)); }, xs, 1e-6, 1e-7);
  CHECK(r.passed);
  const std::vector<double> w{0.5, -1.0, 2.0};
  r = check_gradients([&] { return weighted_sum(row_sum(mul(x, x)), w); }, xs, 1e-6, 1e-7);
  CHECK(r.passed);
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  Tensor a = random_matrix(2, 2, 31, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    const Tensor y = matmul(a, a);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(matmul(a, a).requires_grad());
}

TEST_CASE("shape contracts") {
  CHECK_THROWS_AS(matmul(random_matrix(2, 3, 1), random_matrix(2, 3, 2)), ContractViolation);
  CHECK_THROWS_AS(add(random_matrix(2, 3, 1), random_matrix(3, 2, 2)), ContractViolation);
  CHECK_THROWS_AS(Tensor::matrix(2, 2, {1.0, 2.0, 3.0}), ContractViolation);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}
