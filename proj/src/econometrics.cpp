#include "bubblelab/econometrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace bubblelab {

void DataTable::check_length(const std::string& name, std::size_t n) {
    if (numeric_.contains(name) || category_.contains(name))
        throw std::invalid_argument("duplicate column '" + name + "'");
    if (sized_ && n != rows_)
        throw std::invalid_argument("column '" + name + "' has " + std::to_string(n) + " rows, expected " +
                                    std::to_string(rows_));
    rows_ = n;
    sized_ = true;
}

void DataTable::add_numeric(const std::string& name, std::vector<double> values) {
    check_length(name, values.size());
    numeric_.emplace(name, std::move(values));
}

void DataTable::add_category(const std::string& name, std::vector<std::string> values) {
    check_length(name, values.size());
    category_.emplace(name, std::move(values));
}

const std::vector<double>& DataTable::numeric(const std::string& name) const {
    auto it = numeric_.find(name);
    if (it == numeric_.end()) throw EstimationError("no numeric column '" + name + "'");
    return it->second;
}

const std::vector<std::string>& DataTable::category(const std::string& name) const {
    auto it = category_.find(name);
    if (it == category_.end()) throw EstimationError("no categorical column '" + name + "'");
    return it->second;
}

const Coefficient& FitResult::coef(const std::string& name) const {
    for (const auto& c : coefficients)
        if (c.name == name) return c;
    throw std::out_of_range("no coefficient '" + name + "'");
}

std::vector<double> demean(std::vector<double> column, const std::vector<std::vector<int>>& groups, double tolerance,
                           int max_iterations) {
    if (groups.empty()) return column;
    const std::size_t n = column.size();
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    for (int iter = 0; iter < max_iterations; ++iter) {
        double max_change = 0.0;
        for (const auto& g : groups) {
            int levels = g.empty() ? 0 : *std::max_element(g.begin(), g.end()) + 1;
            sums.assign(levels, 0.0);
            counts.assign(levels, 0);
            for (std::size_t i = 0; i < n; ++i) {
                sums[g[i]] += column[i];
                ++counts[g[i]];
            }
            for (int l = 0; l < levels; ++l) {
                if (counts[l] == 0) continue;
                sums[l] /= static_cast<double>(counts[l]);
                max_change = std::max(max_change, std::abs(sums[l]));
            }
            for (std::size_t i = 0; i < n; ++i) column[i] -= sums[g[i]];
        }
        if (max_change < tolerance) return column;
        // A single grouping is exact after one sweep.
        if (groups.size() == 1 && iter >= 1) return column;
    }
    throw EstimationError("fixed-effect demeaning did not converge");
}

namespace {

std::vector<int> encode(const std::vector<std::string>& values, const std::vector<std::size_t>& keep,
                        std::size_t* levels) {
    std::unordered_map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) {
        auto [it, inserted] = ids.try_emplace(values[i], static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    *levels = ids.size();
    return out;
}

// Connected components of the bipartite graph linking levels of two groupings.
std::size_t components(const std::vector<int>& a, std::size_t na, const std::vector<int>& b, std::size_t nb) {
    std::vector<std::size_t> parent(na + nb);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto ra = find(static_cast<std::size_t>(a[i]));
        auto rb = find(na + static_cast<std::size_t>(b[i]));
        if (ra != rb) parent[ra] = rb;
    }
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent.size(); ++i)
        if (find(i) == i) ++c;
    return c;
}

std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& s : names) out += (out.empty() ? "" : ", ") + s;
    return out;
}

}  // namespace

FitResult fit(const Design& design, const DataTable& table) {
    const std::size_t k = design.regressors.size();
    if (k == 0) throw EstimationError("design has no regressors");

    // Listwise deletion.
    const auto& y_raw = table.numeric(design.response);
    std::vector<const std::vector<double>*> x_raw;
    for (const auto& name : design.regressors) x_raw.push_back(&table.numeric(name));
    std::vector<const std::vector<std::string>*> fe_raw;
    for (const auto& name : design.fixed_effects) fe_raw.push_back(&table.category(name));
    const std::vector<std::string>* cl_raw = design.cluster ? &table.category(*design.cluster) : nullptr;

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        bool ok = std::isfinite(y_raw[i]);
        for (auto* x : x_raw) ok = ok && std::isfinite((*x)[i]);
        for (auto* f : fe_raw) ok = ok && !(*f)[i].empty();
        if (cl_raw) ok = ok && !(*cl_raw)[i].empty();
        if (ok) keep.push_back(i);
    }
    const std::size_t n = keep.size();
    if (n == 0) throw EstimationError("no complete rows for response '" + design.response + "'");

    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, k);
    for (std::size_t r = 0; r < n; ++r) {
        y(r) = y_raw[keep[r]];
        for (std::size_t j = 0; j < k; ++j) x(r, j) = (*x_raw[j])[keep[r]];
    }

    const double y_mean = y.mean();
    const double tss = (y.array() - y_mean).square().sum();
    if (!(tss > 0.0)) throw EstimationError("response '" + design.response + "' has zero variance");
    for (std::size_t j = 0; j < k; ++j) {
        double m = x.col(j).mean();
        if (!((x.col(j).array() - m).square().sum() > 0.0))
            throw EstimationError("regressor '" + design.regressors[j] + "' has zero variance");
    }

    // Absorb fixed effects.
    std::vector<std::vector<int>> groups;
    std::vector<std::size_t> levels;
    for (auto* f : fe_raw) {
        std::size_t l = 0;
        groups.push_back(encode(*f, keep, &l));
        levels.push_back(l);
    }
    std::size_t absorbed = 0;
    if (!groups.empty()) {
        absorbed = std::accumulate(levels.begin(), levels.end(), std::size_t{0});
        // Exact redundancy count for the first pair, one per extra grouping.
        if (groups.size() >= 2)
            absorbed -= components(groups[0], levels[0], groups[1], levels[1]) + (groups.size() - 2);
    }

    Eigen::VectorXd yt = y;
    Eigen::MatrixXd xt = x;
    if (!groups.empty()) {
        std::vector<double> col(y.data(), y.data() + n);
        col = demean(std::move(col), groups);
        yt = Eigen::Map<Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<double> c(n);
            for (std::size_t r = 0; r < n; ++r) c[r] = x(r, j);
            c = demean(std::move(c), groups);
            xt.col(j) = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(n));
        }
    } else {
        yt.array() -= y_mean;
        for (std::size_t j = 0; j < k; ++j) xt.col(j).array() -= x.col(j).mean();
    }

    // Rank checks on the residualized regressors.
    for (std::size_t j = 0; j < k; ++j) {
        double raw_ss = (x.col(j).array() - x.col(j).mean()).square().sum();
        if (xt.col(j).squaredNorm() <= 1e-10 * raw_ss)
            throw EstimationError("regressor '" + design.regressors[j] +
                                  "' is collinear with the fixed effects (" + join(design.fixed_effects) + ")");
    }
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xt);
        qr.setThreshold(1e-10);
        if (static_cast<std::size_t>(qr.rank()) < k) {
            std::vector<std::string> independent, culprits;
            Eigen::MatrixXd basis(n, 0);
            for (std::size_t j = 0; j < k; ++j) {
                Eigen::MatrixXd trial(n, basis.cols() + 1);
                trial << basis, xt.col(j);
                Eigen::ColPivHouseholderQR<Eigen::MatrixXd> q(trial);
                q.setThreshold(1e-10);
                if (q.rank() == trial.cols()) {
                    basis = trial;
                    independent.push_back(design.regressors[j]);
                } else {
                    culprits.push_back(design.regressors[j]);
                }
            }
            throw EstimationError("rank-deficient design: " + join(culprits) +
                                  " is a linear combination of " + join(independent));
        }
    }

    const std::size_t params = k + (groups.empty() ? 1 : absorbed);
    if (n <= params)
        throw EstimationError("too few rows: N=" + std::to_string(n) + " with " + std::to_string(params) +
                              " parameters");

    Eigen::VectorXd beta = xt.colPivHouseholderQr().solve(yt);
    Eigen::VectorXd u = yt - xt * beta;
    Eigen::MatrixXd bread = (xt.transpose() * xt).inverse();

    // Cluster scores.
    std::size_t g_count = n;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    if (cl_raw) {
        std::size_t nc = 0;
        auto cl = encode(*cl_raw, keep, &nc);
        g_count = nc;
        if (g_count < 2)
            throw EstimationError("only one cluster in '" + *design.cluster +
                                  "'; clustered standard errors are undefined");
        Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nc), k);
        for (std::size_t r = 0; r < n; ++r) scores.row(cl[r]) += xt.row(r) * u(r);
        meat = scores.transpose() * scores;
    } else {
        for (std::size_t r = 0; r < n; ++r) {
            Eigen::VectorXd s = xt.row(r).transpose() * u(r);
            meat += s * s.transpose();
        }
    }
    const double g = static_cast<double>(g_count);
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(params);
    const double factor = g / (g - 1.0) * (nn - 1.0) / (nn - kk);
    Eigen::MatrixXd vcov = factor * bread * meat * bread;

    FitResult out;
    out.n = n;
    out.clusters = g_count;
    out.absorbed_levels = absorbed;
    out.parameters = params;
    out.fixed_effects = design.fixed_effects;
    out.cluster = design.cluster.value_or("");
    double xb = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        Coefficient c;
        c.name = design.regressors[j];
        c.estimate = beta(j);
        c.std_error = std::sqrt(std::max(0.0, vcov(j, j)));
        c.t_stat = c.std_error > 0.0 ? c.estimate / c.std_error : 0.0;
        out.coefficients.push_back(c);
        xb += x.col(j).mean() * beta(j);
    }
    out.intercept = y_mean - xb;
    const double ssr = u.squaredNorm();
    out.r_squared = 1.0 - ssr / tss;
    out.adj_r_squared = 1.0 - (1.0 - out.r_squared) * (nn - 1.0) / (nn - kk);
    return out;
}

GroupDifference group_mean_difference(const DataTable& table, const std::string& feature, const std::string& flag,
                                      const std::vector<std::string>& fixed_effects,
                                      const std::optional<std::string>& cluster) {
    const auto& f = table.numeric(flag);
    for (double v : f)
        if (std::isfinite(v) && v != 0.0 && v != 1.0)
            throw EstimationError("flag '" + flag + "' is not binary");
    auto res = fit({feature, {flag}, fixed_effects, cluster}, table);
    const auto& c = res.coefficients.front();
    return {c.estimate, c.std_error, c.t_stat, res.n};
}

}  // namespace bubblelab
