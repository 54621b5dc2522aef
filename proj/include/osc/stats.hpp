#pragma once

#include <vector>

namespace osc::stats {

double mean(const std::vector<double>& v);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& v);
/// Average ranks starting at 1; ties share their mean rank.
std::vector<double> ranks(const std::vector<double>& v);
double pearson(const std::vector<double>& a, const std::vector<double>& b);
/// Pearson correlation of the ranks.
double spearman(const std::vector<double>& a, const std::vector<double>& b);
/// Area under the ROC curve for scores where higher means "positive"
/// (Mann-Whitney statistic, ties count one half).
double roc_auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);
/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);

}  // namespace osc::stats
