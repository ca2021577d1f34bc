#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mrtcn {

/// A scalar function of a flat parameter vector together with its claimed
/// analytic gradient.
struct GradCheckProblem {
    std::string label;
    std::vector<double> point;
    std::function<double(std::span<const double>)> objective;
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// entries whose true gradient is zero from dividing roundoff by roundoff.
inline constexpr double kGradCheckFloor = 1e-5;

/// Largest relative error between the analytic gradient and central
/// differences with the given perturbation, over every entry of the point.
double max_relative_error(const GradCheckProblem& problem, double perturbation = 1e-5);

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t problems = 0;
    std::string worst_problem;
    bool passed() const { return max_rel_error < tolerance; }
};

/// Named gradient checks. Each factory builds one or more random problems
/// from a seed.
class GradCheckRegistry {
public:
    using Factory = std::function<std::vector<GradCheckProblem>(std::uint64_t seed)>;

    void add(std::string name, double tolerance, Factory factory);
    std::vector<std::string> names() const;
    bool contains(const std::string& name) const;

    /// Throws InvalidArgument for an unknown name.
    GradCheckResult run(const std::string& name, std::uint64_t seed, double perturbation = 1e-5) const;
    std::vector<GradCheckResult> run_all(std::uint64_t seed, double perturbation = 1e-5) const;

    /// conv1d (kernel/stride/dilation/padding grid incl. the reference tower
    /// rows), batchnorm1d (train and eval), relu, softmax + weighted
    /// cross-entropy, tconv_block and the three-tower network.
    static GradCheckRegistry builtin();

private:
    struct Entry {
        std::string name;
        double tolerance;
        Factory factory;
    };
    std::vector<Entry> entries_;
};

/// Runs one builtin check and returns its max relative error.
double finite_diff_check(const std::string& op_name, std::uint64_t seed = 7, double perturbation = 1e-5);

}  // namespace mrtcn
