#include "bregmix/constituent.hpp"

#include <cmath>
#include <string>

#include "bregmix/error.hpp"

namespace bregmix {

namespace {

std::vector<LmsFilterState> zero_filters(Eigen::Index filter_order, const std::vector<double>& step_sizes)
{
    if (filter_order <= 0) {
        throw ConfigError("constituents: filter order must be positive");
    }
    std::vector<LmsFilterState> filters;
    filters.reserve(step_sizes.size());
    for (double mu : step_sizes) {
        filters.push_back({Eigen::VectorXd::Zero(filter_order), mu});
    }
    return filters;
}

}  // namespace

FilterBank::FilterBank(Eigen::Index filter_order, const std::vector<double>& step_sizes)
    : FilterBank(zero_filters(filter_order, step_sizes))
{
}

FilterBank::FilterBank(std::vector<LmsFilterState> filters)
    : order_(filters.empty() ? 0 : filters.front().weights.size()), filters_(std::move(filters))
{
    if (filters_.size() < 2) {
        throw ConfigError("constituents: a mixture needs at least two filters");
    }
    for (std::size_t i = 0; i < filters_.size(); ++i) {
        const auto& f = filters_[i];
        const std::string where = "constituents[" + std::to_string(i) + "]";
        if (f.weights.size() != order_ || order_ == 0) {
            throw ConfigError(where + ": inconsistent filter order");
        }
        if (!(f.mu > 0.0) || !std::isfinite(f.mu)) {
            throw ConfigError(where + ".mu: must be > 0");
        }
        if (!f.weights.allFinite()) {
            throw ConfigError(where + ": non-finite weights");
        }
    }
}

void FilterBank::check_dimension(const Eigen::VectorXd& a) const
{
    if (a.size() != order_) {
        throw ConfigError("regressor length " + std::to_string(a.size()) + " does not match filter order "
                          + std::to_string(order_));
    }
}

void FilterBank::predict(const Eigen::VectorXd& a, Eigen::VectorXd& x) const
{
    check_dimension(a);
    x.resize(static_cast<Eigen::Index>(filters_.size()));
    for (std::size_t i = 0; i < filters_.size(); ++i) {
        x[static_cast<Eigen::Index>(i)] = filters_[i].weights.dot(a);
    }
}

Eigen::VectorXd FilterBank::predict(const Eigen::VectorXd& a) const
{
    Eigen::VectorXd x;
    predict(a, x);
    return x;
}

void FilterBank::adapt(const Eigen::VectorXd& a, double y)
{
    check_dimension(a);
    for (std::size_t i = 0; i < filters_.size(); ++i) {
        auto& f = filters_[i];
        const double err = y - f.weights.dot(a);
        f.weights += (f.mu * err) * a;
        if (!f.weights.allFinite()) {
            throw DivergenceError("constituent filter " + std::to_string(i + 1));
        }
    }
}

Eigen::VectorXd bank_predict(const FilterBank& bank, const Eigen::VectorXd& a)
{
    return bank.predict(a);
}

FilterBank bank_adapt(const FilterBank& bank, const Eigen::VectorXd& a, double y)
{
    FilterBank next = bank;
    next.adapt(a, y);
    return next;
}

}  // namespace bregmix
