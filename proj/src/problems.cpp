#include "chatter/problems.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace chatter::problems {

ControlProblem<double> build_lqr(double control_lower, double control_upper) {
    ControlProblem<double> p;
    p.name = "lqr";
    p.state_dim = 1;
    p.control_dim = 1;
    p.horizon = 1.0;
    p.initial_state = Vector<double>::Constant(1, kLqrInitialState);
    p.running_cost = [](double, const Vector<double>& x, const Vector<double>& u) {
        return x[0] * x[0] + u[0] * u[0];
    };
    p.dynamics = [](double, const Vector<double>& x, const Vector<double>& u) {
        return Vector<double>::Constant(1, x[0] + u[0]);
    };
    p.hamiltonian_x_gradient = [](double, const Vector<double>& x, const Vector<double>& costate,
                                  const Vector<double>&) {
        return Vector<double>::Constant(1, 2.0 * x[0] + costate[0]);
    };
    p.control_lower = Vector<double>::Constant(1, control_lower);
    p.control_upper = Vector<double>::Constant(1, control_upper);
    p.validate();
    return p;
}

// With u* = -p/2 the extremals obey z' = A z, A = [[1, -1/2], [-2, -1]].
// A^2 = 2 I, so exp(A t) = cosh(s t) I + sinh(s t) / s * A with s = sqrt(2).
LqrSolutionPoint lqr_analytic_solution(double t) {
    const double s = std::numbers::sqrt2;
    const double x0 = kLqrInitialState;
    const double shc = std::sinh(s) / s;
    // p(1) = cosh(s) p0 + shc (-2 x0 - p0) = 0
    const double p0 = 2.0 * x0 * shc / (std::cosh(s) - shc);

    const double c = std::cosh(s * t);
    const double sh = std::sinh(s * t) / s;
    LqrSolutionPoint pt;
    pt.x = c * x0 + sh * (x0 - 0.5 * p0);
    pt.p = c * p0 + sh * (-2.0 * x0 - p0);
    pt.u = -0.5 * pt.p;
    // quadratic value function V(x, t) = p x / 2
    pt.j_star = 0.5 * p0 * x0;
    return pt;
}

namespace {

std::vector<ItemRecord> make_items() {
    return {
        {0, "Apple", 100, 10},
        {1, "Orange", 150, 25},
        {2, "Banana", 200, 39},
        {3, "Tea", 50, 30},
        {4, "Olive", 65, 25},
    };
}

std::vector<SupplierRecord> make_suppliers() {
    auto none = [](double) { return 0.0; };
    return {
        {0, "New Hampshire", 20, 10, 7, 14, none},
        {0, "Colorado", 25, 7, 4, 11, none},
        {1, "Florida", 50, 10, 5, 20, none},
        {1, "California", 70, 5, 4, 13, none},
        {2, "Costa Rica", 20, 15, 8, 13, none},
        {2, "Italy", 30, 20, 2, 13, none},
        {2, "India", 15, 25, 6, 25, none},
        {3, "India", 12, 25, 2, 16, none},
        {3, "Sri Lanka", 11, 25, 9, 26, none},
        {3, "England", 20, 15, 6, 14, none},
        {3, "Market", 23, 20, 2, 18, none},
        {4, "Greece", 20, 15, 15, 17, none},
        {4, "Italy", 25, 12, 10, 22, none},
        {4, "Market", 30, 18, 11, 14, none},
    };
}

std::vector<CustomerRecord> make_customers() {
    return {
        {1, 1.0, {}},
        {2, 0.4, {}},
        {3, 0.25, {}},
    };
}

}  // namespace

const std::vector<ItemRecord>& grocer_items() {
    static const std::vector<ItemRecord> items = make_items();
    return items;
}

const std::vector<SupplierRecord>& grocer_suppliers() {
    static const std::vector<SupplierRecord> suppliers = make_suppliers();
    return suppliers;
}

const std::vector<CustomerRecord>& grocer_customers() {
    static const std::vector<CustomerRecord> customers = make_customers();
    return customers;
}

DemandProfile parse_demand_profile(const std::string& name) {
    if (name == "constant") return DemandProfile::Constant;
    if (name == "seasonal") return DemandProfile::Seasonal;
    if (name == "pulse") return DemandProfile::Pulse;
    throw ConfigError("unknown demand profile '" + name + "' (expected constant, seasonal or pulse)");
}

std::string to_string(DemandProfile profile) {
    switch (profile) {
        case DemandProfile::Constant: return "constant";
        case DemandProfile::Seasonal: return "seasonal";
        case DemandProfile::Pulse: return "pulse";
    }
    return "constant";
}

FixedCostMode parse_fixed_cost_mode(const std::string& name) {
    if (name == "always") return FixedCostMode::Always;
    if (name == "on-order") return FixedCostMode::OnOrder;
    throw ConfigError("unknown fixed-cost-mode '" + name + "' (expected always or on-order)");
}

std::string to_string(FixedCostMode mode) { return mode == FixedCostMode::Always ? "always" : "on-order"; }

DemandModel synthetic_demand(DemandProfile profile, double amplitude, double period) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) throw ConfigError("demand amplitude must be >= 0");
    if (profile == DemandProfile::Seasonal && !(period > 0.0))
        throw ConfigError("seasonal demand needs period > 0");
    if (profile == DemandProfile::Pulse && !(period >= 0.0)) throw ConfigError("pulse demand needs period >= 0");

    DemandModel d;
    std::ostringstream desc;
    desc << to_string(profile) << "(amplitude=" << amplitude << ", period=" << period << ")";
    d.description = desc.str();
    switch (profile) {
        case DemandProfile::Constant:
            d.theta = [amplitude](double, int, int) { return amplitude; };
            break;
        case DemandProfile::Seasonal: {
            std::vector<double> importance;
            for (const auto& c : grocer_customers()) importance.push_back(c.importance);
            d.theta = [amplitude, period, importance](double t, int customer, int) {
                const double phase = 2.0 * std::numbers::pi * t / period;
                return importance.at(static_cast<std::size_t>(customer)) * amplitude * 0.5 *
                       (1.0 + std::sin(phase));
            };
            break;
        }
        case DemandProfile::Pulse:
            d.theta = [amplitude, period](double t, int, int) {
                return (t >= period && t < 2.0 * period) ? amplitude : 0.0;
            };
            break;
    }
    return d;
}

SupplyChainModel::SupplyChainModel(DemandModel demand, SupplyChainOptions options)
    : demand_(std::move(demand)),
      options_(options),
      customers_(grocer_customers()),
      unit_cost_(kItems, 0.0),
      fixed_cost_(kItems, 0.0),
      unmet_weight_(kItems * kCustomers, 0.0),
      cost_state_gradient_(Vector<double>::Zero(kSupplyChainStateDim)) {
    if (!demand_.theta) throw ConfigError("demand model has no evaluator");
    for (const auto& s : grocer_suppliers()) {
        unit_cost_[s.item_id] += s.unit_cost;
        fixed_cost_[s.item_id] += s.fixed_cost;
    }
    for (auto& c : customers_) {
        const double factor = options_.revenue_factor;
        const std::vector<double> alpha = unit_cost_;
        c.revenue = [factor, alpha](double, int item) { return factor * alpha.at(static_cast<std::size_t>(item)); };
    }

    double total = 0.0;
    for (int i = 0; i < kCustomers; ++i)
        for (int j = 0; j < kItems; ++j) total += unmet_weight_numerator(i, j);
    for (int i = 0; i < kCustomers; ++i)
        for (int j = 0; j < kItems; ++j) unmet_weight_[i * kItems + j] = unmet_weight_numerator(i, j) / total;

    const auto& items = grocer_items();
    for (int j = 0; j < kItems; ++j) {
        cost_state_gradient_[inventory_index(j)] = items[j].inv_carry_cost;
        for (int i = 0; i < kCustomers; ++i) cost_state_gradient_[unmet_index(i, j)] = unmet_weight(i, j);
    }
}

double SupplyChainModel::unmet_weight_numerator(int customer, int item) const {
    return customers_.at(static_cast<std::size_t>(customer)).importance *
           grocer_items().at(static_cast<std::size_t>(item)).penalty;
}

double SupplyChainModel::instantaneous_cost(double t, const Vector<double>& x, const Vector<double>& u) const {
    const auto& suppliers = grocer_suppliers();
    double ordered[kItems] = {0, 0, 0, 0, 0};
    for (int k = 0; k < kSupplierRows; ++k) ordered[suppliers[k].item_id] += u[order_index(k)];

    double j_cost = 0.0;
    for (int i = 0; i < kCustomers; ++i)
        for (int j = 0; j < kItems; ++j) j_cost -= u[delivery_index(i, j)] * customers_[i].revenue(t, j);
    for (int j = 0; j < kItems; ++j) {
        j_cost += unit_cost_[j] * ordered[j];
        if (options_.fixed_cost_mode == FixedCostMode::Always || ordered[j] > 0.0) j_cost += fixed_cost_[j];
    }
    j_cost += cost_state_gradient_.dot(x);
    return j_cost;
}

double SupplyChainModel::running_cost(double t, const Vector<double>& x, const Vector<double>& u) const {
    const double j = instantaneous_cost(t, x, u);
    return j * std::abs(j);
}

Vector<double> SupplyChainModel::dynamics(double t, const Vector<double>& x, const Vector<double>& u) const {
    const auto& suppliers = grocer_suppliers();
    Vector<double> dx(kSupplyChainStateDim);
    for (int j = 0; j < kItems; ++j) dx[inventory_index(j)] = -x[inventory_index(j)];
    for (int k = 0; k < kSupplierRows; ++k) {
        const auto& s = suppliers[k];
        dx[inventory_index(s.item_id)] += u[order_index(k)] + s.supply_rate(t);
    }
    for (int i = 0; i < kCustomers; ++i) {
        for (int j = 0; j < kItems; ++j) {
            const double v = u[delivery_index(i, j)];
            dx[inventory_index(j)] -= v;
            dx[unmet_index(i, j)] = -x[unmet_index(i, j)] + demand_.theta(t, i, j) - v;
        }
    }
    return dx;
}

Vector<double> SupplyChainModel::hamiltonian_x_gradient(double t, const Vector<double>& x, const Vector<double>& p,
                                                        const Vector<double>& u) const {
    const double j = instantaneous_cost(t, x, u);
    return 2.0 * std::abs(j) * cost_state_gradient_ - p;
}

Vector<double> SupplyChainModel::hamiltonian_on_levels(double t, const Vector<double>& x, const Vector<double>& p,
                                                       const Matrix<double>& levels) const {
    const auto& suppliers = grocer_suppliers();
    Vector<double> cost_coef(kSupplyChainControlDim);
    Vector<double> flow_coef(kSupplyChainControlDim);
    double cost_base = cost_state_gradient_.dot(x);
    double flow_base = 0.0;
    for (int j = 0; j < kItems; ++j) flow_base -= p[inventory_index(j)] * x[inventory_index(j)];
    for (int k = 0; k < kSupplierRows; ++k) {
        const int item = suppliers[k].item_id;
        cost_coef[order_index(k)] = unit_cost_[item];
        flow_coef[order_index(k)] = p[inventory_index(item)];
        flow_base += p[inventory_index(item)] * suppliers[k].supply_rate(t);
    }
    for (int i = 0; i < kCustomers; ++i) {
        for (int j = 0; j < kItems; ++j) {
            const int d = delivery_index(i, j);
            const int z = unmet_index(i, j);
            cost_coef[d] = -customers_[i].revenue(t, j);
            flow_coef[d] = -p[inventory_index(j)] - p[z];
            flow_base += p[z] * (demand_.theta(t, i, j) - x[z]);
        }
    }
    const bool always = options_.fixed_cost_mode == FixedCostMode::Always;
    if (always)
        for (int j = 0; j < kItems; ++j) cost_base += fixed_cost_[j];

    Vector<double> h(levels.cols());
    for (Eigen::Index c = 0; c < levels.cols(); ++c) {
        const auto u = levels.col(c);
        double j_cost = cost_base + cost_coef.dot(u);
        if (!always) {
            double ordered[kItems] = {0, 0, 0, 0, 0};
            for (int k = 0; k < kSupplierRows; ++k) ordered[suppliers[k].item_id] += u[order_index(k)];
            for (int j = 0; j < kItems; ++j)
                if (ordered[j] > 0.0) j_cost += fixed_cost_[j];
        }
        h[c] = j_cost * std::abs(j_cost) + flow_base + flow_coef.dot(u);
    }
    return h;
}

std::pair<ControlProblem<double>, std::shared_ptr<const SupplyChainModel>> build_supply_chain_with_model(
    const DemandModel& demand, double horizon, int intervals, const SupplyChainOptions& options) {
    if (intervals < 1) throw ConfigError("supply chain needs at least one interval");
    if (!(options.max_delivery > 0.0)) throw ConfigError("max delivery must be > 0");
    auto model = std::make_shared<const SupplyChainModel>(demand, options);

    ControlProblem<double> p;
    p.name = "supply-chain";
    p.state_dim = kSupplyChainStateDim;
    p.control_dim = kSupplyChainControlDim;
    p.horizon = horizon;
    p.initial_state = Vector<double>::Zero(kSupplyChainStateDim);
    for (int j = 0; j < kItems; ++j) {
        p.initial_state[inventory_index(j)] = options.initial_inventory;
        for (int i = 0; i < kCustomers; ++i) p.initial_state[unmet_index(i, j)] = options.initial_unmet;
    }
    p.running_cost = [model](double t, const Vector<double>& x, const Vector<double>& u) {
        return model->running_cost(t, x, u);
    };
    p.dynamics = [model](double t, const Vector<double>& x, const Vector<double>& u) {
        return model->dynamics(t, x, u);
    };
    p.hamiltonian_x_gradient = [model](double t, const Vector<double>& x, const Vector<double>& costate,
                                       const Vector<double>& u) {
        return model->hamiltonian_x_gradient(t, x, costate, u);
    };
    p.hamiltonian_on_levels = [model](double t, const Vector<double>& x, const Vector<double>& costate,
                                      const Matrix<double>& levels) {
        return model->hamiltonian_on_levels(t, x, costate, levels);
    };

    p.control_lower = Vector<double>::Zero(kSupplyChainControlDim);
    p.control_upper = Vector<double>::Constant(kSupplyChainControlDim, options.max_delivery);
    Vector<double> active = Vector<double>::Zero(kSupplyChainControlDim);
    const auto& suppliers = grocer_suppliers();
    for (int k = 0; k < kSupplierRows; ++k) {
        p.control_upper[order_index(k)] = suppliers[k].max_qty;
        active[order_index(k)] = suppliers[k].min_qty;
    }
    p.control_active_lower = active;
    p.state_lower = Vector<double>::Zero(kSupplyChainStateDim);
    p.validate();
    return {std::move(p), std::move(model)};
}

ControlProblem<double> build_supply_chain(const DemandModel& demand, double horizon, int intervals,
                                          const SupplyChainOptions& options) {
    return build_supply_chain_with_model(demand, horizon, intervals, options).first;
}

double market_step_oracle(double z, double theta, double v, double dt) { return z + dt * (-z + theta - v); }

// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string canonical_cell(const std::string& raw) {
    const std::string cell = trim(raw);
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (!cell.empty() && res.ec == std::errc() && res.ptr == cell.data() + cell.size()) return format_number(v);
    return cell;
}

}  // namespace

std::string canonicalize_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        std::string out;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            out += canonical_cell(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            out += ',';
            start = comma + 1;
        }
        lines.push_back(trim(out));
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string result;
    for (const auto& l : lines) result += l + "\n";
    return result;
}

std::vector<TableFixture> canonical_tables() {
    std::string items = "Item j,Name,InvCarrCost gamma^j,Penalty delta^j\n";
    for (const auto& it : grocer_items())
        items += std::to_string(it.item_id) + "," + it.name + "," + format_number(it.inv_carry_cost) + "," +
                 format_number(it.penalty) + "\n";

    std::string customers = "Customer i,Importance w_i\n";
    for (const auto& c : grocer_customers())
        customers += std::to_string(c.customer_id) + "," + format_number(c.importance) + "\n";

    std::string suppliers = "Item j,Supplier k,UnitCost alpha_k^j,FixCost beta_k^j,MinQty mu_k min^j,MaxQty mu_k max^j\n";
    for (const auto& s : grocer_suppliers())
        suppliers += std::to_string(s.item_id) + "," + s.supplier + "," + format_number(s.unit_cost) + "," +
                     format_number(s.fixed_cost) + "," + format_number(s.min_qty) + "," +
                     format_number(s.max_qty) + "\n";

    return {
        {"grocer_items.csv", canonicalize_csv(items)},
        {"grocer_customers.csv", canonicalize_csv(customers)},
        {"grocer_suppliers.csv", canonicalize_csv(suppliers)},
    };
}

}  // namespace chatter::problems
