#pragma once

#include <vector>

namespace lesionsynth::stats {

// Regularized incomplete beta I_x(a,b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, int dof);

// Mann-Whitney AUC: fraction of (positive, negative) pairs with
// score_pos > score_neg, ties counted 0.5. labels are binary (1 = positive).
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct TTestResult {
  double t = 0;
  int dof = 0;
  double p = 1;  // two-sided
  bool significant = false;  // p < 0.05
};

// Two-sided paired-samples t-test (n-1 dof, sample sd with n-1 divisor).
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // n-1 divisor

}  // namespace lesionsynth::stats
