#include "mollify/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mollify/error.hpp"
#include "mollify/oracle.hpp"

namespace mollify {
namespace {

TEST(Kernels, NamesRoundTrip) {
  for (KernelKind k : kAllKernelKinds) EXPECT_EQ(parse_kernel_kind(kernel_name(k)), k);
  try {
    parse_kernel_kind("box");
    FAIL() << "expected ConfigInvalid";
  } catch (const ConfigInvalid& e) {
    const std::string msg = e.what();
    for (const char* n : {"gaussian", "poisson", "hyperbolic", "sigmoid", "rect"}) {
      EXPECT_NE(msg.find(n), std::string::npos);
    }
  }
}

TEST(Kernels, RejectsBadEpsilon) {
  EXPECT_THROW(KernelSpec(KernelKind::gaussian, 0.0), ConfigInvalid);
  EXPECT_THROW(KernelSpec(KernelKind::gaussian, -1.0), ConfigInvalid);
  EXPECT_THROW(KernelSpec(KernelKind::gaussian, std::nan("")), ConfigInvalid);
}

TEST(Kernels, PdfExamples) {
  EXPECT_DOUBLE_EQ(KernelSpec(KernelKind::gaussian, 1).pdf(0), 0.3989422804014327);
  EXPECT_DOUBLE_EQ(KernelSpec(KernelKind::poisson, 1).pdf(0), 0.3183098861837907);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 2).pdf(1.5), 0.25);
  // Closed support.
  EXPECT_EQ(KernelSpec(KernelKind::rect, 2).pdf(2.0), 0.25);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 2).pdf(2.0000001), 0.0);
  EXPECT_DOUBLE_EQ(KernelSpec(KernelKind::hyperbolic, 1).pdf(0), 0.5);
  EXPECT_DOUBLE_EQ(KernelSpec(KernelKind::sigmoid, 1).pdf(0), 0.25);
}

TEST(Kernels, CdfExamples) {
  for (KernelKind k : kAllKernelKinds) EXPECT_EQ(KernelSpec(k, 1.3).cdf(0.0), 0.5);
  EXPECT_NEAR(KernelSpec(KernelKind::sigmoid, 1).cdf(1), 0.7310585786300049, 1e-16);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 1).cdf(2), 1.0);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 1).cdf(-2), 0.0);
}

TEST(Kernels, InvCdfExamples) {
  for (KernelKind k : kAllKernelKinds) EXPECT_EQ(KernelSpec(k, 2.0).inv_cdf(0.5), 0.0);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 1).inv_cdf(0.75), 0.5);
  EXPECT_NEAR(KernelSpec(KernelKind::poisson, 1).inv_cdf(0.75), 1.0, 1e-15);
  for (KernelKind k : kAllKernelKinds) {
    EXPECT_THROW(KernelSpec(k, 1).inv_cdf(0.0), DomainError);
    EXPECT_THROW(KernelSpec(k, 1).inv_cdf(1.0), DomainError);
    EXPECT_THROW(KernelSpec(k, 1).inv_cdf(-0.1), DomainError);
  }
}

TEST(Kernels, ProductDensity) {
  const std::vector<double> origin{0.0, 0.0};
  EXPECT_NEAR(KernelSpec(KernelKind::gaussian, 1).pdf_nd(origin), 0.15915494309189535, 1e-17);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 1).pdf_nd(std::vector<double>{0.5, -0.5, 0.0}), 0.125);
  EXPECT_EQ(KernelSpec(KernelKind::rect, 1).pdf_nd(std::vector<double>{2.0, 0.0}), 0.0);
}

TEST(Kernels, LogPdfMatchesPdf) {
  for (KernelKind k : kAllKernelKinds) {
    const KernelSpec ks(k, 0.7);
    for (double x : {-3.0, -0.5, 0.0, 0.2, 0.69, 2.5}) {
      const double p = ks.pdf(x);
      if (p > 0) {
        EXPECT_NEAR(ks.log_pdf(x), std::log(p), 1e-13) << kernel_name(k) << " " << x;
      } else {
        EXPECT_EQ(ks.log_pdf(x), -INFINITY);
      }
    }
    const std::vector<double> v{0.1, -0.3, 0.2};
    EXPECT_NEAR(ks.log_pdf_nd(v), std::log(ks.pdf_nd(v)), 1e-13);
  }
}

TEST(Kernels, LogPdfSurvivesHighDimension) {
  const KernelSpec ks(KernelKind::gaussian, 1.0);
  const std::vector<double> x(2000, 1.0);
  EXPECT_EQ(ks.pdf_nd(x), 0.0);
  EXPECT_NEAR(ks.log_pdf_nd(x), 2000.0 * ks.log_pdf(1.0), 1e-9);
}

TEST(Kernels, SymmetryIsExact) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (KernelKind k : kAllKernelKinds) {
    const KernelSpec ks(k, 1.7);
    for (int i = 0; i < 1000; ++i) {
      const double x = dist(gen);
      ASSERT_EQ(ks.pdf(x), ks.pdf(-x));
    }
  }
}

TEST(Kernels, CdfMatchesPdfDerivative) {
  for (KernelKind k : kAllKernelKinds) {
    const KernelSpec ks(k, 0.8);
    for (double x : {-2.0, -0.3, 0.0, 0.45, 1.9}) {
      if (k == KernelKind::rect && std::abs(std::abs(x) - 0.8) < 1e-3) continue;
      const double h = 1e-5;
      const double fd = (ks.cdf(x + h) - ks.cdf(x - h)) / (2 * h);
      EXPECT_NEAR(fd, ks.pdf(x), 1e-8) << kernel_name(k) << " " << x;
    }
  }
}

TEST(Kernels, CdfMonotoneWithLimits) {
  for (KernelKind k : kAllKernelKinds) {
    const KernelSpec ks(k, 1.0);
    double prev = 0.0;
    for (int i = -400; i <= 400; ++i) {
      const double v = ks.cdf(i * 0.05);
      EXPECT_GE(v, prev);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
    EXPECT_NEAR(ks.cdf(-1e300), 0.0, 1e-12);
    EXPECT_NEAR(ks.cdf(1e300), 1.0, 1e-12);
  }
}

TEST(Kernels, RoundTripAndScaling) {
  for (KernelKind k : kAllKernelKinds) {
    const KernelSpec unit(k, 1.0);
    for (double eps : {0.5, 1.0, 3.0}) {
      const KernelSpec ks(k, eps);
      for (int i = 1; i < 999; ++i) {
        const double u = i / 1000.0;
        ASSERT_LE(std::abs(ks.cdf(ks.inv_cdf(u)) - u), 1e-10) << kernel_name(k) << " " << u;
        EXPECT_EQ(ks.inv_cdf(u), eps * unit.inv_cdf(u));
      }
    }
  }
}

TEST(Kernels, NormalizedUnderQuadrature) {
  for (KernelKind k : kAllKernelKinds) {
    for (double eps : {0.5, 1.0, 3.0}) {
      const KernelSpec ks(k, eps);
      const auto panels = kernel_panels(ks);
      const auto r = integrate([&](double x) { return ks.pdf(x); }, panels, {.abs_tol = 1e-12});
      EXPECT_NEAR(r.value, 1.0, 1e-9) << kernel_name(k) << " eps=" << eps;
    }
  }
}

TEST(Kernels, DiracSequenceConcentrates) {
  for (KernelKind k : kAllKernelKinds) {
    const double x = 0.5;
    double prev = INFINITY;
    for (double eps : {1.0, 0.1, 0.01, 0.001}) {
      const KernelSpec ks(k, eps);
      const double v = ks.pdf(x);
      EXPECT_LE(v, prev) << kernel_name(k);
      prev = v;
    }
    // Poisson decays only like eps / (pi x^2).
    EXPECT_LT(prev, 2e-3);
    const double a = 0.05;
    const KernelSpec narrow(k, 1e-4);
    EXPECT_NEAR(narrow.cdf(a) - narrow.cdf(-a), 1.0, 1e-2) << kernel_name(k);
  }
}

TEST(SolveEpsilon, Examples) {
  EXPECT_NEAR(solve_epsilon(KernelKind::poisson, {1.0, 0.5}), 1.0, 1e-12);
  // 1 / (sqrt(2) erfinv(0.9)) with a 40-digit erfinv.
  EXPECT_NEAR(solve_epsilon(KernelKind::gaussian, {1.0, 0.9}), 0.6079568319117691, 1e-13);
  EXPECT_NEAR(solve_epsilon(KernelKind::rect, {1.0, 0.9}), 1.1111111111111112, 1e-13);
}

TEST(SolveEpsilon, ReproducesConfidenceLevelOnGrid) {
  for (KernelKind k : kAllKernelKinds) {
    for (double r : {0.5, 1.0, 2.0}) {
      for (double alpha : {0.5, 0.9, 0.95}) {
        const ConfidenceSpec c{r, alpha};
        const double numeric = solve_epsilon_numeric(k, c);
        EXPECT_LE(std::abs(confidence_residual(k, numeric, c)), 1e-9);
        const double fast = solve_epsilon(k, c);
        EXPECT_LE(std::abs(confidence_residual(k, fast, c)), 1e-9);
        EXPECT_NEAR(closed_form_epsilon(k, c), numeric, 1e-9 * numeric) << kernel_name(k);
      }
    }
  }
}

TEST(SolveEpsilon, PrintedFormsDisagreeForHyperbolicAndRect) {
  const ConfidenceSpec c{1.0, 0.9};
  for (KernelKind k : {KernelKind::gaussian, KernelKind::poisson, KernelKind::sigmoid}) {
    EXPECT_NEAR(printed_closed_form_epsilon(k, c), solve_epsilon_numeric(k, c), 1e-9);
  }
  for (KernelKind k : {KernelKind::hyperbolic, KernelKind::rect}) {
    const double printed = printed_closed_form_epsilon(k, c);
    EXPECT_GT(std::abs(confidence_residual(k, printed, c)), 1e-3) << kernel_name(k);
  }
  EXPECT_NEAR(printed_closed_form_epsilon(KernelKind::rect, c), 2.0 / 0.9, 1e-15);
}

TEST(SolveEpsilon, RejectsBadConfidence) {
  EXPECT_THROW(solve_epsilon(KernelKind::gaussian, {0.0, 0.9}), ConfigInvalid);
  EXPECT_THROW(solve_epsilon(KernelKind::gaussian, {1.0, 1.0}), ConfigInvalid);
  EXPECT_THROW(solve_epsilon(KernelKind::gaussian, {1.0, 0.0}), ConfigInvalid);
}

}  // namespace
}  // namespace mollify
