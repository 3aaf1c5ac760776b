#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

// Column store for regressions. Numeric missing values are NaN; categorical
// missing values are empty strings.
class DataTable {
public:
    void add_numeric(const std::string& name, std::vector<double> values);
    void add_category(const std::string& name, std::vector<std::string> values);

    std::size_t rows() const { return rows_; }
    bool has_numeric(const std::string& name) const { return numeric_.contains(name); }
    bool has_category(const std::string& name) const { return category_.contains(name); }
    const std::vector<double>& numeric(const std::string& name) const;
    const std::vector<std::string>& category(const std::string& name) const;

private:
    void check_length(const std::string& name, std::size_t n);

    std::size_t rows_ = 0;
    bool sized_ = false;
    std::map<std::string, std::vector<double>> numeric_;
    std::map<std::string, std::vector<std::string>> category_;
};

struct Design {
    std::string response;
    std::vector<std::string> regressors;
    std::vector<std::string> fixed_effects;  // categorical columns to absorb
    std::optional<std::string> cluster;      // none: each row is its own cluster
};

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
};

struct FitResult {
    std::vector<Coefficient> coefficients;
    double intercept = 0.0;  // mean(y) - mean(x)·b
    double r_squared = 0.0;
    double adj_r_squared = 0.0;
    std::size_t n = 0;
    std::size_t clusters = 0;
    std::size_t absorbed_levels = 0;  // FE parameters net of redundancies
    std::size_t parameters = 0;       // regressors + absorbed levels (or + intercept)
    std::vector<std::string> fixed_effects;
    std::string cluster;

    const Coefficient& coef(const std::string& name) const;
};

// Raised for degenerate designs: rank deficiency, zero variance, too few rows
// or clusters. The message names the offending columns.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Within estimator: fixed effects absorbed by alternating projections,
// OLS on the demeaned system, cluster-robust sandwich standard errors with
// the G/(G-1)·(N-1)/(N-K) small-sample factor.
FitResult fit(const Design& design, const DataTable& table);

struct GroupDifference {
    double difference = 0.0;
    double std_error = 0.0;
    double t_stat = 0.0;
    std::size_t n = 0;
};

// Coefficient on a binary flag regressed alone (plus fixed effects).
GroupDifference group_mean_difference(const DataTable& table, const std::string& feature, const std::string& flag,
                                      const std::vector<std::string>& fixed_effects,
                                      const std::optional<std::string>& cluster);

// Alternating-projection demeaning of `column` within every grouping in
// `groups` (integer-coded). Exposed for tests.
std::vector<double> demean(std::vector<double> column, const std::vector<std::vector<int>>& groups,
                           double tolerance = 1e-10, int max_iterations = 100000);

}  // namespace bubblelab
