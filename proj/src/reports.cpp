#include "silicon/reports.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "silicon/text.hpp"

namespace silicon::reports {

namespace {

std::string metric(const MetricResult& m, int decimals = 2) {
    return m.value ? text::fixed(*m.value, decimals) : "NA";
}

std::string csv(const std::vector<text::Row>& rows) {
    std::ostringstream out;
    for (auto& r : rows) text::write_row(out, r, ',');
    return out.str();
}

std::string integral(double v) {
    if (v == static_cast<double>(static_cast<long long>(v))) return std::to_string(static_cast<long long>(v));
    return text::shortest(v);
}

}  // namespace

std::string fidelity_table(const FidelityReport& report) {
    std::vector<text::Row> rows{{"Variable", "Tetrachoric Correlation", "Cohen's Kappa", "ICC", "Prop. agreement"}};
    for (auto& r : report.rows)
        rows.push_back({r.subgroup, metric(r.tetrachoric), metric(r.kappa), metric(r.icc), metric(r.agreement)});
    return csv(rows);
}

std::string yearly_fidelity_table(const std::vector<std::pair<std::string, FidelityReport>>& years) {
    text::Row header{"Variable"};
    std::vector<std::string> order;
    for (auto& [year, report] : years) {
        header.push_back(year + " Tetra.");
        header.push_back(year + " Prop. Agree");
        for (auto& r : report.rows)
            if (std::find(order.begin(), order.end(), r.subgroup) == order.end()) order.push_back(r.subgroup);
    }
    std::vector<text::Row> rows{header};
    for (auto& name : order) {
        text::Row row{name};
        for (auto& [_, report] : years) {
            auto it = std::find_if(report.rows.begin(), report.rows.end(),
                                   [&](const FidelityRow& r) { return r.subgroup == name; });
            if (it == report.rows.end()) {
                row.push_back("NA");
                row.push_back("NA");
            } else {
                row.push_back(metric(it->tetrachoric));
                row.push_back(metric(it->agreement));
            }
        }
        rows.push_back(std::move(row));
    }
    return csv(rows);
}

std::string temperature_table(const std::vector<std::pair<std::string, DifferenceSummary>>& columns) {
    text::Row header{"Summary Statistic"}, mean{"Mean"}, min{"Minimum"}, max{"Maximum"}, sd{"Standard Deviation"}, n{"N"};
    for (auto& [t, s] : columns) {
        header.push_back("Temp: " + t);
        bool empty = s.cells == 0;
        mean.push_back(empty ? "NA" : text::fixed(s.mean, 3));
        min.push_back(empty ? "NA" : text::fixed(s.min, 3));
        max.push_back(empty ? "NA" : text::fixed(s.max, 3));
        sd.push_back(s.cells < 2 ? "NA" : text::fixed(s.sd, 3));
        n.push_back(std::to_string(s.observations));
    }
    return csv({header, mean, min, max, sd, n});
}

std::string missingness_table(const std::vector<MissingnessPair>& rows, const std::string& human_label,
                              const std::string& silicon_label) {
    std::vector<text::Row> out{{"Variable", human_label, silicon_label}};
    for (auto& r : rows) out.push_back({r.label, text::trimmed(r.human_percent, 1), text::trimmed(r.silicon_percent, 1)});
    return csv(out);
}

std::string descriptives_table(const std::vector<SourcedDescriptives>& rows) {
    std::vector<text::Row> out{{"Variable", "Source", "N", "Mean", "St. Dev.", "Min", "Pctl(25)", "Pctl(75)", "Max"}};
    auto opt = [](const std::optional<double>& v, bool is_integral) {
        if (!v) return std::string();
        return is_integral ? integral(*v) : text::fixed(*v, 3);
    };
    for (auto& r : rows) {
        const auto& d = r.stats;
        out.push_back({r.label, r.source, std::to_string(d.n), opt(d.mean, false), opt(d.sd, false), opt(d.min, true),
                       opt(d.p25, true), opt(d.p75, true), opt(d.max, true)});
    }
    return csv(out);
}

std::string cramers_v_comparison(const MatrixComparison& cmp, const std::string& human_label,
                                 const std::string& silicon_label) {
    std::vector<text::Row> out{{"Input Variable", "Output Variable", human_label + " Cramer's V",
                                silicon_label + " Cramer's V", "Difference"}};
    for (auto& c : cmp.cells)
        out.push_back({c.input, c.output, text::trimmed(c.human, 2), text::trimmed(c.silicon, 2),
                       text::trimmed(c.human - c.silicon, 2)});
    return csv(out);
}

std::string matrix_csv(const AssociationMatrix& m) {
    text::Row header{"input/output"};
    header.insert(header.end(), m.variables.begin(), m.variables.end());
    std::vector<text::Row> out{header};
    for (std::size_t i = 0; i < m.variables.size(); ++i) {
        text::Row row{m.variables[i]};
        for (std::size_t j = 0; j < m.variables.size(); ++j)
            row.push_back(m.values[i][j] ? text::fixed(*m.values[i][j], 6) : "NA");
        out.push_back(std::move(row));
    }
    return csv(out);
}

std::string matrix_json(const AssociationMatrix& m) {
    nlohmann::ordered_json j;
    j["source"] = to_string(m.source);
    j["observations"] = m.observations;
    j["variables"] = m.variables;
    auto values = nlohmann::ordered_json::array();
    auto flags = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.variables.size(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t jj = 0; jj < m.variables.size(); ++jj) {
            if (m.values[i][jj]) row.push_back(*m.values[i][jj]);
            else row.push_back(nullptr);
            if (!m.flags[i][jj].empty())
                flags.push_back({{"input", m.variables[i]}, {"output", m.variables[jj]}, {"reason", m.flags[i][jj]}});
        }
        values.push_back(std::move(row));
    }
    j["values"] = std::move(values);
    j["flags"] = std::move(flags);
    return j.dump(2) + "\n";
}

std::string difference_summary(const DifferenceSummary& s) {
    bool empty = s.cells == 0;
    return csv({{"Summary Statistic", "Value"},
                {"Mean", empty ? "NA" : text::fixed(s.mean, 3)},
                {"Minimum", empty ? "NA" : text::fixed(s.min, 3)},
                {"Maximum", empty ? "NA" : text::fixed(s.max, 3)},
                {"Standard Deviation", s.cells < 2 ? "NA" : text::fixed(s.sd, 3)},
                {"N", std::to_string(s.observations)},
                {"Cells", std::to_string(s.cells)}});
}

}  // namespace silicon::reports
