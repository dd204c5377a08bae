#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bregmix {

/// One LMS filter: w <- w + mu (y - w^T a) a.
struct LmsFilterState {
    Eigen::VectorXd weights;
    double mu = 0.0;
};

/// First-stage bank of m >= 2 LMS filters sharing one input. Each filter
/// adapts on its own prediction error; filters never interact.
class FilterBank {
public:
    /// Zero-initialized filters of length `filter_order`, one per step size.
    FilterBank(Eigen::Index filter_order, const std::vector<double>& step_sizes);
    explicit FilterBank(std::vector<LmsFilterState> filters);

    std::size_t size() const { return filters_.size(); }
    Eigen::Index filter_order() const { return order_; }
    const std::vector<LmsFilterState>& filters() const { return filters_; }

    /// x = [w_1^T a, ..., w_m^T a].
    Eigen::VectorXd predict(const Eigen::VectorXd& a) const;
    void predict(const Eigen::VectorXd& a, Eigen::VectorXd& x) const;

    /// Adapts every filter in place. Throws DivergenceError on a non-finite weight.
    void adapt(const Eigen::VectorXd& a, double y);

private:
    void check_dimension(const Eigen::VectorXd& a) const;

    Eigen::Index order_;
    std::vector<LmsFilterState> filters_;
};

Eigen::VectorXd bank_predict(const FilterBank& bank, const Eigen::VectorXd& a);

/// Returns the adapted bank; `bank` is not modified.
FilterBank bank_adapt(const FilterBank& bank, const Eigen::VectorXd& a, double y);

}  // namespace bregmix
