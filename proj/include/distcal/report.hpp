#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "distcal/distributions.hpp"
#include "distcal/evaluator.hpp"

namespace distcal {

namespace detail {

inline std::string metric_cell(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

inline std::string optional_cell(const std::optional<double>& value) {
    return value ? metric_cell(*value) : std::string("---");
}

}  // namespace detail

// Machine form; key order and float formatting are deterministic so repeated
// runs produce byte-identical reports.
inline nlohmann::ordered_json eval_report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["prompts"] = nlohmann::ordered_json::array();
    for (const PromptRecord& r : report.prompts) {
        nlohmann::ordered_json p;
        p["id"] = r.id;
        p["family"] = std::string(family_info(r.family).name);
        p["n_samples"] = r.n_samples;
        p["valid_rate"] = r.valid_rate;
        p["w1_raw"] = r.w1_raw ? nlohmann::ordered_json(*r.w1_raw) : nullptr;
        p["w1_norm"] = r.w1_norm ? nlohmann::ordered_json(*r.w1_norm) : nullptr;
        p["logit_kl"] = r.logit_kl;
        p["unique_frac"] = r.unique_frac;
        p["top_mass_support"] = r.top_mass_support;
        j["prompts"].push_back(std::move(p));
    }
    j["families"] = nlohmann::ordered_json::array();
    for (const FamilyAggregate& f : report.families) {
        nlohmann::ordered_json a;
        a["family"] = std::string(family_info(f.family).name);
        a["n_prompts"] = f.n_prompts;
        a["mean_valid_rate"] = f.mean_valid_rate;
        a["mean_logit_kl"] = f.mean_logit_kl;
        a["mean_w1_norm"] = f.mean_w1_norm ? nlohmann::ordered_json(*f.mean_w1_norm) : nullptr;
        a["n_finite_w1"] = f.n_finite_w1;
        j["families"].push_back(std::move(a));
    }
    j["aggregates"]["median_w1_norm"] =
        report.median_w1_norm ? nlohmann::ordered_json(*report.median_w1_norm) : nullptr;
    j["aggregates"]["median_valid_rate"] = report.median_valid_rate;
    j["aggregates"]["median_logit_kl"] = report.median_logit_kl;
    return j;
}

// Aligned human-readable table; undefined aggregates render as "---".
inline std::string eval_report_text(const EvalReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"family", "config", "valid", "W1", "W1/q90", "logitKL", "uniq", "top90"});
    for (const PromptRecord& r : report.prompts)
        rows.push_back({std::string(family_info(r.family).display_name), r.id,
                        detail::metric_cell(r.valid_rate), detail::optional_cell(r.w1_raw),
                        detail::optional_cell(r.w1_norm), detail::metric_cell(r.logit_kl),
                        detail::metric_cell(r.unique_frac), std::to_string(r.top_mass_support)});

    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) out += std::string(width[c] - row[c].size() + 2, ' ');
        }
        out += '\n';
    }
    out += '\n';
    out += "family aggregates (mean over prompts; W1/q90 over finite estimates):\n";
    for (const FamilyAggregate& f : report.families) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-18s prompts=%-3d valid=%s  W1/q90=%s  logitKL=%s\n",
                      std::string(family_info(f.family).display_name).c_str(), f.n_prompts,
                      detail::metric_cell(f.mean_valid_rate).c_str(),
                      detail::optional_cell(f.mean_w1_norm).c_str(),
                      detail::metric_cell(f.mean_logit_kl).c_str());
        out += buf;
    }
    out += '\n';
    out += "cross-family medians: W1/q90=" + detail::optional_cell(report.median_w1_norm) +
           "  valid=" + detail::metric_cell(report.median_valid_rate) +
           "  logitKL=" + detail::metric_cell(report.median_logit_kl) + "\n";
    return out;
}

}  // namespace distcal
