#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "chatter/core_model.hpp"

namespace chatter::problems {

// ---------------------------------------------------------------------------
// Linear-quadratic benchmark: min int_0^1 x^2 + u^2 dt, dx/dt = x + u, x(0) = 10.
// ---------------------------------------------------------------------------

inline constexpr double kLqrInitialState = 10.0;
inline constexpr double kLqrDefaultControlLower = -30.0;
inline constexpr double kLqrDefaultControlUpper = 5.0;

ControlProblem<double> build_lqr(double control_lower = kLqrDefaultControlLower,
                                 double control_upper = kLqrDefaultControlUpper);

struct LqrSolutionPoint {
    double x;
    double p;
    double u;
    double j_star;  ///< optimal total cost, independent of t
};

/// Closed-form extremal of the LQR benchmark on [0, 1] (x(0) = 10, p(1) = 0).
LqrSolutionPoint lqr_analytic_solution(double t);

// ---------------------------------------------------------------------------
// Grocer distribution network: 5 items, 14 supplier rows, 3 customers.
// ---------------------------------------------------------------------------

inline constexpr int kItems = 5;
inline constexpr int kCustomers = 3;
inline constexpr int kSupplierRows = 14;
inline constexpr int kSupplyChainStateDim = kItems + kItems * kCustomers;           // 20
inline constexpr int kSupplyChainControlDim = kSupplierRows + kItems * kCustomers;  // 29
inline constexpr double kMaxDelivery = 20.0;

struct ItemRecord {
    int item_id;
    std::string name;
    double inv_carry_cost;
    double penalty;
};

struct SupplierRecord {
    int item_id;
    std::string supplier;
    double unit_cost;
    double fixed_cost;
    double min_qty;
    double max_qty;
    /// In-transit supply rate s_k^j(t).
    std::function<double(double)> supply_rate;
};

struct CustomerRecord {
    int customer_id;
    double importance;
    /// Unit revenue r_i^j(t) for an item.
    std::function<double(double, int)> revenue;
};

struct DemandModel {
    /// Theta_i^j(t) for (t, customer index 0..2, item 0..4).
    std::function<double(double, int, int)> theta;
    std::string description;
};

enum class DemandProfile { Constant, Seasonal, Pulse };
enum class FixedCostMode { Always, OnOrder };

DemandProfile parse_demand_profile(const std::string& name);
std::string to_string(DemandProfile profile);
FixedCostMode parse_fixed_cost_mode(const std::string& name);
std::string to_string(FixedCostMode mode);

const std::vector<ItemRecord>& grocer_items();
const std::vector<CustomerRecord>& grocer_customers();
const std::vector<SupplierRecord>& grocer_suppliers();

/// Constant, seasonal ((1 + sin(2 pi t / period)) / 2 scaled by importance) or
/// pulse (amplitude on [period, 2 period)) demand, identical for every item.
DemandModel synthetic_demand(DemandProfile profile, double amplitude, double period);

struct SupplyChainOptions {
    FixedCostMode fixed_cost_mode = FixedCostMode::OnOrder;
    /// r_i^j = revenue_factor * alpha^j.
    double revenue_factor = 2.0;
    double initial_inventory = 10.0;
    double initial_unmet = 0.0;
    double max_delivery = kMaxDelivery;
};

// State layout: x = [X^0..X^4, Z_0^0, Z_1^0, Z_2^0, Z_0^1, ...] (item-major).
constexpr int inventory_index(int item) { return item; }
constexpr int unmet_index(int customer, int item) { return kItems + item * kCustomers + customer; }
// Control layout: u = [mu_k (Table 2 row order), v_i^j (customer-major)].
constexpr int order_index(int supplier_row) { return supplier_row; }
constexpr int delivery_index(int customer, int item) { return kSupplierRows + customer * kItems + item; }

/**
 * Evaluators for the grocer network. The running cost is J(t)|J(t)| with
 *
 *   J = -sum_ij v_i^j r_i^j + sum_j (alpha^j muhat^j + beta^j [muhat^j > 0])
 *       + sum_j gamma^j X^j + sum_ij wbar_i^j Z_i^j.
 */
class SupplyChainModel {
public:
    SupplyChainModel(DemandModel demand, SupplyChainOptions options);

    double instantaneous_cost(double t, const Vector<double>& x, const Vector<double>& u) const;
    double running_cost(double t, const Vector<double>& x, const Vector<double>& u) const;
    Vector<double> dynamics(double t, const Vector<double>& x, const Vector<double>& u) const;
    /// dH/dx = 2|J| dJ/dx - p.
    Vector<double> hamiltonian_x_gradient(double t, const Vector<double>& x, const Vector<double>& p,
                                          const Vector<double>& u) const;
    /// H at every level column. J and p'f are affine in the controls apart
    /// from the fixed-cost indicator, so coefficients are formed once per call.
    Vector<double> hamiltonian_on_levels(double t, const Vector<double>& x, const Vector<double>& p,
                                         const Matrix<double>& levels) const;

    double envelope_unit_cost(int item) const { return unit_cost_[item]; }
    double envelope_fixed_cost(int item) const { return fixed_cost_[item]; }
    /// w_i delta^j / sum_ij w_i delta^j.
    double unmet_weight(int customer, int item) const { return unmet_weight_[customer * kItems + item]; }
    /// w_i delta^j before normalization.
    double unmet_weight_numerator(int customer, int item) const;
    const SupplyChainOptions& options() const { return options_; }
    const DemandModel& demand() const { return demand_; }

private:
    DemandModel demand_;
    SupplyChainOptions options_;
    std::vector<CustomerRecord> customers_;
    std::vector<double> unit_cost_;
    std::vector<double> fixed_cost_;
    std::vector<double> unmet_weight_;
    Vector<double> cost_state_gradient_;
};

ControlProblem<double> build_supply_chain(const DemandModel& demand, double horizon, int intervals,
                                          const SupplyChainOptions& options = {});

/// Same problem plus access to the model behind its evaluators.
std::pair<ControlProblem<double>, std::shared_ptr<const SupplyChainModel>> build_supply_chain_with_model(
    const DemandModel& demand, double horizon, int intervals, const SupplyChainOptions& options = {});

/// One explicit step of a single market-conservation row.
double market_step_oracle(double z, double theta, double v, double dt);

// ---------------------------------------------------------------------------
// Table fixtures
// ---------------------------------------------------------------------------

struct TableFixture {
    std::string file_name;
    std::string text;  ///< canonical CSV, LF line endings
};

/// Canonical CSV text of the embedded item, customer and supplier tables.
std::vector<TableFixture> canonical_tables();

/// Re-renders a CSV document canonically: trimmed cells, numbers in %.17g
/// shortest round-trip form, LF line endings, no trailing blank lines.
std::string canonicalize_csv(const std::string& text);

}  // namespace chatter::problems
