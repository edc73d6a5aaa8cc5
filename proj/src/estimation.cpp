#include "qwsense/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace qwsense {

namespace {

// uniform double in [0,1) from the top 53 bits of the raw engine output
double canonical_uniform(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace

MeasurementRecord sample_counts(const VectorXd& p, long total, uint64_t seed,
                                double theta_true) {
    if (total < 1) throw std::invalid_argument("sample_counts: need M >= 1");
    double sum = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (!(p(i) >= -1e-12) || !std::isfinite(p(i)))
            throw std::invalid_argument("sample_counts: invalid probability vector");
        sum += std::max(p(i), 0.0);
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("sample_counts: probabilities do not sum to 1");

    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        acc += std::max(p(i), 0.0) / sum;
        cdf[i] = acc;
    }
    cdf.back() = 1.0;

    std::mt19937_64 engine(seed);
    MeasurementRecord record;
    record.counts = VectorXi::Zero(p.size());
    record.total = total;
    record.theta_true = theta_true;
    record.seed = seed;
    for (long m = 0; m < total; ++m) {
        const double u = canonical_uniform(engine);
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const int idx = static_cast<int>(std::distance(cdf.begin(), it));
        record.counts(std::min<int>(idx, static_cast<int>(p.size()) - 1)) += 1;
    }
    return record;
}

LogLikelihood log_likelihood(const MeasurementRecord& record,
                             const std::vector<double>& theta_grid,
                             const ForwardModel& model) {
    LogLikelihood out;
    out.values.reserve(theta_grid.size());
    for (const double theta : theta_grid) {
        const VectorXd p = model(theta);
        if (p.size() != record.counts.size())
            throw std::invalid_argument("log_likelihood: model/record dimension mismatch");
        double ll = 0.0;
        for (int j = 0; j < p.size(); ++j) {
            if (record.counts(j) == 0) continue;
            double pj = p(j);
            if (pj < 1e-300) {
                pj = 1e-300;
                ++out.floored_with_counts;
            }
            ll += record.counts(j) * std::log(pj);
        }
        out.values.push_back(ll);
    }
    return out;
}

namespace {

Posterior posterior_impl(const PriorSpec& prior, const std::vector<double>& loglik,
                         const std::vector<double>& grid, bool* below_resolution) {
    if (grid.size() != loglik.size())
        throw std::invalid_argument("posterior: grid/likelihood length mismatch");
    if (grid.size() < 200)
        throw std::invalid_argument("posterior: grid must have >= 200 points");
    if (!(prior.hi > prior.lo)) throw std::invalid_argument("posterior: empty prior range");

    Posterior post;
    post.theta_grid = grid;
    post.log_posterior.resize(grid.size());
    const double log_prior = -std::log(prior.hi - prior.lo);
    double peak = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < grid.size(); ++i) {
        const bool inside = grid[i] >= prior.lo && grid[i] <= prior.hi;
        post.log_posterior[i] =
            inside ? loglik[i] + log_prior : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, post.log_posterior[i]);
    }
    if (!std::isfinite(peak))
        throw std::invalid_argument("posterior: no grid point lies inside the prior range");

    post.pdf.resize(grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
        post.pdf[i] = std::exp(post.log_posterior[i] - peak);

    auto trapezoid = [&](const std::vector<double>& f) {
        double s = 0.0;
        for (size_t i = 0; i + 1 < grid.size(); ++i)
            s += 0.5 * (f[i] + f[i + 1]) * (grid[i + 1] - grid[i]);
        return s;
    };
    const double z = trapezoid(post.pdf);
    if (!(z > 0)) throw convergence_error("posterior: vanishing normalization");
    for (double& v : post.pdf) v /= z;

    std::vector<double> weighted(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) weighted[i] = post.pdf[i] * grid[i];
    post.mean = trapezoid(weighted);
    for (size_t i = 0; i < grid.size(); ++i)
        weighted[i] = post.pdf[i] * (grid[i] - post.mean) * (grid[i] - post.mean);
    post.std_dev = std::sqrt(trapezoid(weighted));

    const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    *below_resolution = post.std_dev < 2.0 * step;
    return post;
}

}  // namespace

Posterior posterior(const PriorSpec& prior, const std::vector<double>& loglik,
                    const std::vector<double>& theta_grid) {
    bool below = false;
    Posterior post = posterior_impl(prior, loglik, theta_grid, &below);
    if (below)
        throw convergence_error(
            "posterior: mass concentrates below grid resolution (std < 2 steps); refine the grid");
    return post;
}

double crb_bound(double fisher_value, long total) {
    if (!(fisher_value > 0)) throw std::invalid_argument("crb_bound: Fisher value must be positive");
    if (total < 1) throw std::invalid_argument("crb_bound: M must be >= 1");
    return 1.0 / std::sqrt(static_cast<double>(total) * fisher_value);
}

EstimationResult estimate_with_refinement(const MeasurementRecord& record,
                                          const ForwardModel& model, const PriorSpec& prior,
                                          int grid_points, int max_refinements) {
    if (grid_points < 200) grid_points = 200;
    double lo = prior.lo, hi = prior.hi;
    EstimationResult result;
    for (int round = 0;; ++round) {
        std::vector<double> grid(grid_points);
        const double step = (hi - lo) / (grid_points - 1);
        for (int i = 0; i < grid_points; ++i) grid[i] = lo + step * i;
        const LogLikelihood ll = log_likelihood(record, grid, model);
        bool below = false;
        result.post = posterior_impl(prior, ll.values, grid, &below);
        result.refinements = round;

        // a zoomed window must not clip posterior mass at its edges
        const double peak_pdf = *std::max_element(result.post.pdf.begin(), result.post.pdf.end());
        const bool clipped = (lo > prior.lo && result.post.pdf.front() > 1e-9 * peak_pdf) ||
                             (hi < prior.hi && result.post.pdf.back() > 1e-9 * peak_pdf);

        if (!below && !clipped) return result;
        if (round >= max_refinements)
            throw convergence_error(
                "estimate_with_refinement: posterior still below resolution at refinement cap");

        const auto mode_it = std::max_element(result.post.pdf.begin(), result.post.pdf.end());
        const double mode = grid[std::distance(result.post.pdf.begin(), mode_it)];
        // zoom on the mode; window from the current grid resolution, not the
        // (resolution-limited) std estimate
        const double window = clipped ? 0.5 * (hi - lo) * 4.0 : 20.0 * step;
        lo = std::max(prior.lo, mode - window);
        hi = std::min(prior.hi, mode + window);
        if (!(hi > lo)) throw convergence_error("estimate_with_refinement: degenerate zoom window");
    }
}

void save_record_json(const MeasurementRecord& record, const WalkConfig& config,
                      const std::string& path) {
    nlohmann::json j;
    j["counts"] = std::vector<long long>(record.counts.data(),
                                         record.counts.data() + record.counts.size());
    j["M"] = record.total;
    j["theta_true"] = record.theta_true;
    j["seed"] = record.seed;
    j["config"] = {
        {"half_size", config.half_size},
        {"boundary", config.boundary == Boundary::OBC ? "OBC" : "CBC"},
        {"theta1_left", config.theta1_left},
        {"theta2_left", config.theta2_left},
        {"theta1_right", config.theta1_right},
        {"theta2_right", config.theta2_right},
        {"gamma", config.gamma},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_record_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

MeasurementRecord load_record_json(const std::string& path, WalkConfig* config_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_record_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    MeasurementRecord record;
    const auto counts = j.at("counts").get<std::vector<long long>>();
    record.counts.resize(static_cast<int>(counts.size()));
    long sum = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
        record.counts(static_cast<int>(i)) = static_cast<int>(counts[i]);
        sum += counts[i];
    }
    record.total = j.at("M").get<long>();
    if (sum != record.total)
        throw std::invalid_argument("load_record_json: counts do not sum to M");
    record.theta_true = j.at("theta_true").get<double>();
    record.seed = j.at("seed").get<uint64_t>();
    if (config_out && j.contains("config")) {
        const auto& c = j.at("config");
        config_out->half_size = c.at("half_size").get<int>();
        config_out->boundary =
            c.at("boundary").get<std::string>() == "CBC" ? Boundary::CBC : Boundary::OBC;
        config_out->theta1_left = c.at("theta1_left").get<double>();
        config_out->theta2_left = c.at("theta2_left").get<double>();
        config_out->theta1_right = c.at("theta1_right").get<double>();
        config_out->theta2_right = c.at("theta2_right").get<double>();
        config_out->gamma = c.at("gamma").get<double>();
    }
    return record;
}

}  // namespace qwsense
