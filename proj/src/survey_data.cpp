#include "silicon/survey_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "silicon/text.hpp"

namespace silicon {

using ordered_json = nlohmann::ordered_json;

namespace {

std::optional<std::int64_t> parse_int(const std::string& s) {
    std::string t = text::trim(s);
    if (t.empty()) return std::nullopt;
    std::int64_t v = 0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

VariableKind parse_kind(const std::string& s) {
    if (s == "categorical") return VariableKind::categorical;
    if (s == "integer") return VariableKind::integer;
    if (s == "free_text" || s == "free-text" || s == "text") return VariableKind::free_text;
    throw ConfigError("unknown variable kind '" + s + "'");
}

std::string value_to_code(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ConfigError("level codes must be strings or integers");
}

VariableSpec parse_variable(const ordered_json& j) {
    VariableSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.kind = parse_kind(j.value("kind", std::string("categorical")));
    spec.label = j.value("label", std::string());
    if (auto it = j.find("levels"); it != j.end()) {
        if (it->is_object()) {
            for (auto& [code, label] : it->items()) spec.levels.emplace_back(code, label.get<std::string>());
        } else if (it->is_array()) {
            for (auto& entry : *it) {
                if (entry.is_array())
                    spec.levels.emplace_back(value_to_code(entry.at(0)), entry.at(1).get<std::string>());
                else
                    spec.levels.emplace_back(value_to_code(entry.at("code")), entry.value("label", std::string()));
            }
        }
    }
    if (spec.kind == VariableKind::integer) {
        spec.min = j.at("min").get<std::int64_t>();
        spec.max = j.at("max").get<std::int64_t>();
    }
    if (auto it = j.find("missing_codes"); it != j.end())
        for (auto& c : *it) spec.missing_codes.insert(value_to_code(c));
    return spec;
}

void validate_spec(const VariableSpec& spec) {
    if (spec.name.empty()) throw ConfigError("variable name must be nonempty");
    if (spec.kind == VariableKind::categorical) {
        if (spec.levels.empty()) throw ConfigError("categorical variable '" + spec.name + "' declares no levels");
        std::set<std::string> seen;
        for (auto& [code, _] : spec.levels)
            if (!seen.insert(code).second)
                throw ConfigError("duplicate level code '" + code + "' in variable '" + spec.name + "'");
    }
    if (spec.kind == VariableKind::integer && spec.min > spec.max)
        throw ConfigError("variable '" + spec.name + "' has min > max");
}

}  // namespace

bool VariableSpec::has_level(const std::string& code) const { return level_index(code).has_value(); }

std::optional<std::size_t> VariableSpec::level_index(const std::string& code) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i].first == code) return i;
    return std::nullopt;
}

std::string VariableSpec::check(const std::string& value) const {
    switch (kind) {
        case VariableKind::categorical:
            return has_level(value) ? "" : "undeclared level";
        case VariableKind::integer: {
            auto v = parse_int(value);
            if (!v) return "not an integer";
            if (*v < min || *v > max) return "outside declared range";
            return "";
        }
        case VariableKind::free_text:
            return "";
    }
    return "";
}

Codebook::Codebook(std::vector<VariableSpec> variables) : vars_(std::move(variables)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        validate_spec(vars_[i]);
        if (vars_[i].name == "respondent_id") throw ConfigError("'respondent_id' is reserved");
        if (!index_.emplace(vars_[i].name, i).second)
            throw ConfigError("duplicate variable '" + vars_[i].name + "' in codebook");
    }
}

std::optional<std::size_t> Codebook::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t Codebook::require(const std::string& name) const {
    auto i = index_of(name);
    if (!i) throw ValidationError("unknown variable '" + name + "'");
    return *i;
}

Codebook parse_codebook(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("codebook is not valid JSON: ") + e.what());
    }
    const ordered_json& list = j.is_object() ? j.at("variables") : j;
    std::vector<VariableSpec> vars;
    try {
        for (auto& v : list) vars.push_back(parse_variable(v));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed codebook entry: ") + e.what());
    }
    return Codebook(std::move(vars));
}

Codebook load_codebook(const std::filesystem::path& path) { return parse_codebook(read_file(path)); }

SurveyDataset::SurveyDataset(Codebook codebook, std::vector<SurveyRecord> records, std::string provenance)
    : codebook_(std::move(codebook)), records_(std::move(records)), provenance_(std::move(provenance)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (records_[i].values.size() != codebook_.size())
            throw ValidationError("record '" + records_[i].respondent_id + "' does not match the codebook width");
        if (!by_id_.emplace(records_[i].respondent_id, i).second)
            throw ValidationError("duplicate respondent_id '" + records_[i].respondent_id + "'");
    }
}

std::optional<std::size_t> SurveyDataset::find(const std::string& respondent_id) const {
    auto it = by_id_.find(respondent_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

const SurveyRecord& SurveyDataset::at(const std::string& respondent_id) const {
    auto i = find(respondent_id);
    if (!i) throw ValidationError("no record with respondent_id '" + respondent_id + "'");
    return records_[*i];
}

std::optional<std::string> SurveyDataset::get(const SurveyRecord& r, const std::string& variable) const {
    return r.values[codebook_.require(variable)];
}

std::vector<std::optional<std::string>> SurveyDataset::column(const std::string& variable) const {
    std::size_t idx = codebook_.require(variable);
    std::vector<std::optional<std::string>> out;
    out.reserve(records_.size());
    for (auto& r : records_) out.push_back(r.values[idx]);
    return out;
}

LoadResult load_dataset_report(const std::filesystem::path& table, const Codebook& codebook,
                               const LoadOptions& options) {
    std::ifstream in(table, std::ios::binary);
    if (!in) throw IoError("cannot open " + table.string());
    text::DelimitedReader reader(in, options.delimiter);
    text::Row header;
    if (!reader.next(header)) throw ValidationError("empty table " + table.string());
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

    std::optional<std::size_t> id_col;
    std::vector<std::optional<std::size_t>> col_var(header.size());
    std::set<std::string> seen_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string name = text::trim(header[c]);
        if (!seen_cols.insert(name).second) throw ValidationError("duplicate column '" + name + "'");
        if (name == "respondent_id") {
            id_col = c;
            continue;
        }
        auto idx = codebook.index_of(name);
        if (!idx) throw ValidationError("unknown column '" + name + "' (not in codebook)");
        col_var[c] = idx;
    }
    if (!id_col) throw ValidationError("table has no respondent_id column");

    std::vector<SurveyRecord> records;
    std::vector<CellError> errors;
    std::set<std::string> ids;
    text::Row row;
    std::size_t data_row = 0;
    while (reader.next(row)) {
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        ++data_row;
        if (row.size() != header.size())
            throw ValidationError("row " + std::to_string(data_row) + " has " + std::to_string(row.size()) +
                                  " fields, header has " + std::to_string(header.size()));
        SurveyRecord rec;
        rec.respondent_id = text::trim(row[*id_col]);
        if (rec.respondent_id.empty()) throw ValidationError("row " + std::to_string(data_row) + " has an empty respondent_id");
        if (!ids.insert(rec.respondent_id).second)
            throw ValidationError("duplicate respondent_id '" + rec.respondent_id + "'");
        rec.values.assign(codebook.size(), std::nullopt);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!col_var[c]) continue;
            const VariableSpec& spec = codebook[*col_var[c]];
            std::string cell = spec.kind == VariableKind::free_text ? row[c] : text::trim(row[c]);
            if (cell.empty() || spec.missing_codes.count(cell)) continue;
            std::string reason = spec.check(cell);
            if (!reason.empty()) {
                errors.push_back({rec.respondent_id, data_row, spec.name, cell, reason});
                continue;
            }
            if (spec.kind == VariableKind::integer) cell = std::to_string(*parse_int(cell));
            rec.values[*col_var[c]] = std::move(cell);
        }
        records.push_back(std::move(rec));
    }
    if (!errors.empty() && !options.lenient) {
        std::ostringstream msg;
        msg << errors.size() << " invalid cell(s) in " << table.string();
        for (std::size_t i = 0; i < std::min<std::size_t>(errors.size(), 5); ++i)
            msg << "; row " << errors[i].row << " (" << errors[i].respondent_id << ") " << errors[i].variable << "='"
                << errors[i].value << "': " << errors[i].reason;
        throw ValidationError(msg.str(), std::move(errors));
    }
    return {SurveyDataset(codebook, std::move(records), table.filename().string()), std::move(errors)};
}

SurveyDataset load_dataset(const std::filesystem::path& table, const Codebook& codebook,
                           const LoadOptions& options) {
    return load_dataset_report(table, codebook, options).dataset;
}

SurveyDataset load_dataset(const std::filesystem::path& table, const std::filesystem::path& codebook,
                           const LoadOptions& options) {
    return load_dataset(table, load_codebook(codebook), options);
}

void save_dataset(const SurveyDataset& dataset, const std::filesystem::path& path, char delimiter) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    text::Row header{"respondent_id"};
    for (auto& v : dataset.codebook().variables()) header.push_back(v.name);
    text::write_row(out, header, delimiter);
    for (auto& r : dataset.records()) {
        text::Row row{r.respondent_id};
        for (auto& v : r.values) row.push_back(v.value_or(""));
        text::write_row(out, row, delimiter);
    }
}

namespace {

FilterClause parse_clause(const nlohmann::json& j) {
    FilterClause c;
    c.variable = j.at("variable").get<std::string>();
    if (auto it = j.find("levels"); it != j.end()) {
        std::set<std::string> levels;
        for (auto& l : *it) levels.insert(l.is_string() ? l.get<std::string>() : std::to_string(l.get<std::int64_t>()));
        c.levels = std::move(levels);
    }
    if (j.contains("min")) c.min = j.at("min").get<std::int64_t>();
    if (j.contains("max")) c.max = j.at("max").get<std::int64_t>();
    if (!c.levels && !c.min && !c.max) throw ConfigError("filter clause on '" + c.variable + "' constrains nothing");
    return c;
}

SubgroupFilter parse_filter_json(const nlohmann::json& j) {
    SubgroupFilter f;
    const nlohmann::json& list = j.is_object() ? j.at("clauses") : j;
    for (auto& c : list) f.clauses.push_back(parse_clause(c));
    return f;
}

}  // namespace

SubgroupFilter parse_filter(const std::string& json_text) {
    try {
        return parse_filter_json(nlohmann::json::parse(json_text));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed subgroup filter: ") + e.what());
    }
}

SubgroupFilter load_filter(const std::filesystem::path& path) { return parse_filter(read_file(path)); }

std::vector<NamedSubgroup> parse_subgroups(const std::string& json_text) {
    try {
        auto j = nlohmann::json::parse(json_text);
        std::vector<NamedSubgroup> out;
        for (auto& g : j) out.push_back({g.at("name").get<std::string>(), parse_filter_json(g.value("clauses", nlohmann::json::array()))});
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed subgroup list: ") + e.what());
    }
}

std::vector<NamedSubgroup> load_subgroups(const std::filesystem::path& path) {
    return parse_subgroups(read_file(path));
}

bool matches(const SurveyDataset& dataset, const SurveyRecord& record, const SubgroupFilter& filter) {
    for (auto& c : filter.clauses) {
        const auto& v = record.values[dataset.codebook().require(c.variable)];
        if (!v) return false;
        if (c.levels && !c.levels->count(*v)) return false;
        if (c.min || c.max) {
            auto n = parse_int(*v);
            if (!n) return false;
            if (c.min && *n < *c.min) return false;
            if (c.max && *n > *c.max) return false;
        }
    }
    return true;
}

std::vector<std::size_t> select(const SurveyDataset& dataset, const SubgroupFilter& filter) {
    for (auto& c : filter.clauses) dataset.codebook().require(c.variable);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (matches(dataset, dataset.records()[i], filter)) out.push_back(i);
    return out;
}

SurveyDataset filter_subgroup(const SurveyDataset& dataset, const SubgroupFilter& filter) {
    std::vector<SurveyRecord> kept;
    for (auto i : select(dataset, filter)) kept.push_back(dataset.records()[i]);
    return SurveyDataset(dataset.codebook(), std::move(kept), dataset.provenance());
}

std::pair<SurveyDataset, SurveyDataset> complete_cases(const SurveyDataset& a, const SurveyDataset& b,
                                                       const std::vector<std::string>& variables) {
    std::vector<std::size_t> ia, ib;
    for (auto& v : variables) {
        ia.push_back(a.codebook().require(v));
        ib.push_back(b.codebook().require(v));
    }
    std::vector<SurveyRecord> ka, kb;
    for (auto& ra : a.records()) {
        auto j = b.find(ra.respondent_id);
        if (!j) continue;
        const SurveyRecord& rb = b.records()[*j];
        bool ok = true;
        for (std::size_t k = 0; k < variables.size() && ok; ++k)
            ok = ra.values[ia[k]].has_value() && rb.values[ib[k]].has_value();
        if (!ok) continue;
        ka.push_back(ra);
        kb.push_back(rb);
    }
    return {SurveyDataset(a.codebook(), std::move(ka), a.provenance()),
            SurveyDataset(b.codebook(), std::move(kb), b.provenance())};
}

std::vector<MissingnessRow> missingness_report(const SurveyDataset& dataset,
                                               const std::vector<std::string>& variables) {
    std::vector<std::size_t> idx;
    for (auto& v : variables) idx.push_back(dataset.codebook().require(v));
    if (dataset.empty()) throw ValidationError("missingness of an empty dataset is undefined");
    std::vector<MissingnessRow> out;
    for (std::size_t k = 0; k < variables.size(); ++k) {
        MissingnessRow row{variables[k], 0, dataset.size(), 0.0};
        for (auto& r : dataset.records())
            if (!r.values[idx[k]]) ++row.missing;
        row.percent = 100.0 * static_cast<double>(row.missing) / static_cast<double>(row.total);
        out.push_back(row);
    }
    return out;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ValidationError("percentile of an empty sample");
    auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<Descriptives> describe(const SurveyDataset& dataset, const std::vector<std::string>& variables) {
    std::vector<Descriptives> out;
    for (auto& name : variables) {
        std::size_t idx = dataset.codebook().require(name);
        const VariableSpec& spec = dataset.codebook()[idx];
        if (spec.kind == VariableKind::free_text)
            throw ValidationError("cannot describe free-text variable '" + name + "'");
        std::vector<double> xs;
        for (auto& r : dataset.records()) {
            if (!r.values[idx]) continue;
            auto v = parse_int(*r.values[idx]);
            if (!v) throw ValidationError("variable '" + name + "' has non-numeric code '" + *r.values[idx] + "'");
            xs.push_back(static_cast<double>(*v));
        }
        Descriptives d;
        d.variable = name;
        d.n = xs.size();
        d.missing = dataset.size() - xs.size();
        if (!xs.empty()) {
            std::sort(xs.begin(), xs.end());
            double sum = 0;
            for (double x : xs) sum += x;
            double mean = sum / static_cast<double>(xs.size());
            d.mean = mean;
            if (xs.size() > 1) {
                double ss = 0;
                for (double x : xs) ss += (x - mean) * (x - mean);
                d.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
            }
            d.min = xs.front();
            d.max = xs.back();
            d.p25 = nearest_rank(xs, 25);
            d.p75 = nearest_rank(xs, 75);
        }
        out.push_back(d);
    }
    return out;
}

}  // namespace silicon
