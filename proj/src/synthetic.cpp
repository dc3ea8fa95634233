#include "cornyield/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cornyield/csv.hpp"
#include "cornyield/error.hpp"
#include "cornyield/rng.hpp"

namespace cornyield::synth {

const std::vector<std::string>& states() {
    static const std::vector<std::string> list = {
        "Abia",  "Abuja", "Akwa Ibom", "Anambra", "Bayelsa", "Benue", "Cross River", "Delta",
        "Ebonyi", "Edo",  "Ekiti",     "Enugu",   "Imo",     "Kebbi", "Kwara",       "Lagos",
        "Ogun",  "Ondo",  "Osun",      "Oyo",     "Plateau", "Rivers", "Taraba"};
    return list;
}

data::VariableSchema canonical_schema() {
    using data::VariableKind;
    std::vector<data::Variable> v = {
        {"district", VariableKind::id, "", {}},
        {"state", VariableKind::categorical, "", states()},
        {"year", VariableKind::categorical, "", {}},
        {"avg_temp_c", VariableKind::numeric, "C", {}},
        {"avg_min_temp_c", VariableKind::numeric, "C", {}},
        {"avg_max_temp_c", VariableKind::numeric, "C", {}},
        {"avg_precip_mm", VariableKind::numeric, "mm", {}},
        {"avg_wind_ms", VariableKind::numeric, "m s^-1", {}},
        {"soil_ph", VariableKind::numeric, "", {}},
        {"clay_pct", VariableKind::numeric, "g 100g^-1", {}},
        {"sand_pct", VariableKind::numeric, "g 100g^-1", {}},
        {"silt_pct", VariableKind::numeric, "g 100g^-1", {}},
        {"cultivation_area_ha", VariableKind::numeric, "ha", {}},
        {"yield_t_ha", VariableKind::target, "t/ha", {}},
    };
    return data::VariableSchema(std::move(v));
}

namespace {

struct StateClimate {
    double min_temp, precip, wind, ph, sand, silt;
};

const std::vector<std::string> kHeader = {"district",     "state",          "year",          "avg_temp_c",
                                          "avg_min_temp_c", "avg_max_temp_c", "avg_precip_mm", "avg_wind_ms",
                                          "soil_ph",      "clay_pct",       "sand_pct",      "silt_pct",
                                          "cultivation_area_ha", "yield_t_ha"};

model::Record enugu_record() {
    return {{"avg_min_temp_c", 21.69208848}, {"avg_precip_mm", 133.5208333}, {"avg_wind_ms", 1.498848967},
            {"soil_ph", 5.466666667},        {"sand_pct", 59.83333333},      {"silt_pct", 10.1666667},
            {"cultivation_area_ha", 0.545488917}};
}

model::Record plateau_record() {
    return {{"avg_min_temp_c", 16.68546347}, {"avg_precip_mm", 99.125},  {"avg_wind_ms", 2.417177081},
            {"soil_ph", 5.566666667},        {"sand_pct", 35.5},         {"silt_pct", 27.33333333},
            {"cultivation_area_ha", 1.686767501}};
}

double shared_part(const model::Record& r) {
    const double area = r.at("cultivation_area_ha");
    return 0.25 + 1.05 * std::pow(std::max(area, 0.0), 0.9) + 0.018 * (r.at("silt_pct") - 20.0) -
           0.006 * (r.at("avg_precip_mm") - 130.0) - 0.015 * (r.at("sand_pct") - 50.0) +
           0.25 * (r.at("soil_ph") - 5.5) + 0.3 * (r.at("avg_wind_ms") - 2.0) - 0.04 * (r.at("avg_min_temp_c") - 19.0);
}

const std::map<std::string, double>& state_effects() {
    static const std::map<std::string, double> effects = [] {
        std::map<std::string, double> e;
        Rng rng(0x57a7e);
        for (const auto& s : states()) e[s] = rng.normal(0.0, 0.15);
        e["Enugu"] = 0.709388681 - shared_part(enugu_record());
        e["Plateau"] = 2.60302342 - shared_part(plateau_record());
        return e;
    }();
    return effects;
}

const std::map<std::string, StateClimate>& climates() {
    static const std::map<std::string, StateClimate> c = [] {
        std::map<std::string, StateClimate> out;
        Rng rng(0xc11a7e);
        for (const auto& s : states())
            out[s] = {rng.uniform(15.0, 23.0), rng.uniform(70.0, 210.0), rng.uniform(1.0, 3.0),
                      rng.uniform(5.0, 6.5),   rng.uniform(30.0, 65.0),  rng.uniform(8.0, 35.0)};
        const auto e = enugu_record();
        const auto p = plateau_record();
        out["Enugu"] = {e.at("avg_min_temp_c"), e.at("avg_precip_mm"), e.at("avg_wind_ms"),
                        e.at("soil_ph"),        e.at("sand_pct"),      e.at("silt_pct")};
        out["Plateau"] = {p.at("avg_min_temp_c"), p.at("avg_precip_mm"), p.at("avg_wind_ms"),
                          p.at("soil_ph"),        p.at("sand_pct"),      p.at("silt_pct")};
        return out;
    }();
    return c;
}

struct Observation {
    std::string district;
    std::string state;
    int year = 0;
    double avg_temp, min_temp, max_temp, precip, wind, ph, clay, sand, silt, area;
};

Observation draw(Rng& rng, const std::string& state, std::string district, int year) {
    const auto& c = climates().at(state);
    Observation o;
    o.district = std::move(district);
    o.state = state;
    o.year = year;
    o.avg_temp = rng.normal(26.0, 1.5);
    o.max_temp = rng.normal(32.0, 2.0);
    o.min_temp = c.min_temp + rng.normal(0.0, 1.2);
    o.precip = std::max(5.0, c.precip + rng.normal(0.0, 25.0));
    o.wind = std::max(0.2, c.wind + rng.normal(0.0, 0.4));
    o.ph = c.ph + rng.normal(0.0, 0.25);
    o.clay = rng.uniform(10.0, 40.0);
    o.sand = std::clamp(c.sand + rng.normal(0.0, 6.0), 5.0, 90.0);
    o.silt = std::clamp(c.silt + rng.normal(0.0, 5.0), 2.0, 60.0);
    o.area = std::exp(rng.normal(std::log(0.8), 0.6));
    return o;
}

model::Record record_of(const Observation& o) {
    return {{"avg_min_temp_c", o.min_temp}, {"avg_precip_mm", o.precip}, {"avg_wind_ms", o.wind},
            {"soil_ph", o.ph},              {"sand_pct", o.sand},        {"silt_pct", o.silt},
            {"cultivation_area_ha", o.area}};
}

Observation from_record(const model::Record& r, const std::string& state, std::string district, int year,
                        Rng& rng) {
    Observation o = draw(rng, state, std::move(district), year);
    o.min_temp = r.at("avg_min_temp_c");
    o.precip = r.at("avg_precip_mm");
    o.wind = r.at("avg_wind_ms");
    o.ph = r.at("soil_ph");
    o.sand = r.at("sand_pct");
    o.silt = r.at("silt_pct");
    o.area = r.at("cultivation_area_ha");
    return o;
}

csv::Row row_of(const Observation& o, double yield) {
    auto f = csv::format_double;
    return {o.district, o.state, std::to_string(o.year), f(o.avg_temp), f(o.min_temp), f(o.max_temp), f(o.precip),
            f(o.wind),  f(o.ph), f(o.clay),              f(o.sand),     f(o.silt),     f(o.area),     f(yield)};
}

}  // namespace

double true_yield(const model::Record& r, const std::string& state) {
    const auto it = state_effects().find(state);
    if (it == state_effects().end()) fail(ErrorCode::UnknownState, "unknown state '" + state + "'");
    return std::max(0.05, shared_part(r) + it->second);
}

std::string dataset_csv(const SynthOptions& opt) {
    Rng rng(derive_seed(opt.seed, 0xda7a));
    const auto& names = states();
    std::vector<csv::Row> rows;
    rows.reserve(opt.unique_rows + opt.duplicate_rows + opt.incomplete_rows);

    rows.push_back(row_of(from_record(enugu_record(), "Enugu", "Enugu-0", 2008, rng),
                          true_yield(enugu_record(), "Enugu")));
    rows.push_back(row_of(from_record(plateau_record(), "Plateau", "Plateau-0", 2008, rng),
                          true_yield(plateau_record(), "Plateau")));
    for (std::size_t i = rows.size(); i < opt.unique_rows; ++i) {
        const auto& state = names[i % names.size()];
        const auto o = draw(rng, state, state + "-" + std::to_string(i / names.size() + 1),
                            2000 + static_cast<int>(rng.index(13)));
        const double y = std::max(0.05, true_yield(record_of(o), state) + rng.normal(0.0, opt.noise_sd));
        rows.push_back(row_of(o, y));
    }
    for (std::size_t i = 0; i < opt.duplicate_rows; ++i) rows.push_back(rows[rng.index(opt.unique_rows)]);
    for (std::size_t i = 0; i < opt.incomplete_rows; ++i) {
        const auto& state = names[rng.index(names.size())];
        const auto o = draw(rng, state, state + "-x" + std::to_string(i), 2000 + static_cast<int>(rng.index(13)));
        auto row = row_of(o, true_yield(record_of(o), state));
        row[3 + rng.index(row.size() - 3)] = "";
        rows.push_back(std::move(row));
    }
    // Keep the two reference records first; shuffle the rest.
    rng.shuffle(std::span<csv::Row>(rows.data() + 2, rows.size() - 2));

    csv::Writer w(kHeader);
    for (const auto& r : rows) w.add(r);
    return w.str();
}

RawFiles write_raw(const std::filesystem::path& dir, const SynthOptions& opt) {
    Rng rng(derive_seed(opt.seed, 0x4a3));
    const auto& names = states();
    constexpr int kFirstObservedYear = 2006;
    constexpr int kYears = 6;
    constexpr int kDistricts = 3;
    constexpr int kTables = 4;
    // Two states without production statistics; their rows drop out when merged.
    std::vector<std::string> observed = names;
    observed.insert(observed.end(), {"Kaduna", "Kano"});

    std::vector<Observation> base;
    for (const auto& state : observed) {
        const auto& climate_state = climates().count(state) ? state : names[base.size() % names.size()];
        for (int d = 1; d <= kDistricts; ++d)
            for (int y = 0; y < kYears; ++y) {
                auto o = draw(rng, climate_state, state + "-" + std::to_string(d) + "-" +
                                                      std::to_string(kFirstObservedYear + y),
                              kFirstObservedYear + y);
                o.state = state;
                base.push_back(o);
            }
    }

    RawFiles files;
    std::filesystem::create_directories(dir);
    for (int t = 0; t < kTables; ++t) {
        csv::Writer w(kHeader);
        for (std::size_t i = 0; i < base.size(); ++i) {
            Observation o = base[i];
            // Each table is one spatial resolution (weather) at one depth (soil).
            o.min_temp += rng.normal(0.0, 0.3);
            o.avg_temp += rng.normal(0.0, 0.3);
            o.max_temp += rng.normal(0.0, 0.3);
            o.precip = std::max(1.0, o.precip + rng.normal(0.0, 5.0));
            o.wind = std::max(0.1, o.wind + rng.normal(0.0, 0.1));
            o.ph += (t % 2 == 0 ? -0.05 : 0.05);
            o.sand += (t % 2 == 0 ? -1.0 : 1.0);
            o.silt += (t % 2 == 0 ? 0.5 : -0.5);
            auto row = row_of(o, 0.0);
            row[12] = "";  // area and yield come from the state statistics
            row[13] = "";
            if (i % 97 == 5) row[6] = "";  // a few gaps in the weather record
            w.add(row);
        }
        const auto path = dir / ("observations_r" + std::to_string(t + 1) + ".csv");
        w.save(path);
        files.tables.push_back(path);
    }

    csv::Writer yields({"state", "year", "value"});
    csv::Writer areas({"state", "year", "value"});
    for (const auto& state : names) {
        double level = rng.uniform(1.0, 3.0);
        double hectares = rng.uniform(20000.0, 300000.0);
        const double drift = rng.uniform(-0.02, 0.05);
        double shock = 0.0;
        for (int year = 1994; year < kFirstObservedYear; ++year) {
            shock = 0.5 * shock + rng.normal(0.0, 0.08);
            level = std::max(0.2, level + drift);
            hectares *= std::exp(rng.normal(0.02, 0.05));
            yields.add({state, std::to_string(year), csv::format_double(level + shock)});
            areas.add({state, std::to_string(year), csv::format_double(hectares)});
        }
    }
    files.yield_series = dir / "yield_series.csv";
    files.area_series = dir / "area_series.csv";
    yields.save(files.yield_series);
    areas.save(files.area_series);
    return files;
}

}  // namespace cornyield::synth
