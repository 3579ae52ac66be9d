/*
 Copyright 2026 The cpcmdp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// JSON instance files:
//   { "n_states": S, "n_actions": A, "gamma": g, "rho": [S],
//     "kernel": [S][A][S], "rewards": [m+1][S][A], "thresholds": [m] }
// Errors name the offending element by its JSON pointer, e.g. /kernel/3/1.

#pragma once

#include "cpcmdp/core.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace cpcmdp {

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& doc, const std::string& key) {
    if (!doc.contains(key))
        throw ModelError("instance: missing field /" + key);
    return doc.at(key);
}

inline double number_at(const nlohmann::json& node, const std::string& path) {
    if (!node.is_number())
        throw ModelError("instance: " + path + " must be a number");
    const double x = node.get<double>();
    if (!std::isfinite(x))
        throw ModelError("instance: " + path + " is not finite");
    return x;
}

inline const nlohmann::json& array_at(const nlohmann::json& node, std::size_t expected,
                                      const std::string& path) {
    if (!node.is_array())
        throw ModelError("instance: " + path + " must be an array");
    if (node.size() != expected)
        throw ModelError("instance: " + path + " has " + std::to_string(node.size()) +
                         " entries, expected " + std::to_string(expected));
    return node;
}

inline Vector vector_at(const nlohmann::json& node, std::size_t n, const std::string& path) {
    array_at(node, n, path);
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        v[Eigen::Index(i)] = number_at(node[i], path + "/" + std::to_string(i));
    return v;
}

inline std::size_t positive_size(const nlohmann::json& doc, const std::string& key) {
    const auto& node = field(doc, key);
    if (!node.is_number_integer() || node.get<long long>() < 1)
        throw ModelError("instance: /" + key + " must be a positive integer");
    return node.get<std::size_t>();
}

} // namespace detail

/// Parses and validates an instance document. Every invariant violation is
/// reported with the JSON pointer of the element responsible.
inline TabularCmdp cmdp_from_json(const nlohmann::json& doc) {
    using namespace detail;
    if (!doc.is_object())
        throw ModelError("instance: document must be a JSON object");
    const std::size_t ns = positive_size(doc, "n_states");
    const std::size_t na = positive_size(doc, "n_actions");
    const double gamma = number_at(field(doc, "gamma"), "/gamma");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ModelError("instance: /gamma must lie in (0,1)");

    const auto& thresholds_node = field(doc, "thresholds");
    if (!thresholds_node.is_array())
        throw ModelError("instance: /thresholds must be an array");
    const std::size_t m = thresholds_node.size();
    Vector thresholds = vector_at(thresholds_node, m, "/thresholds");

    Vector rho = vector_at(field(doc, "rho"), ns, "/rho");
    for (std::size_t s = 0; s < ns; ++s)
        if (rho[Eigen::Index(s)] < 0.0)
            throw ModelError("instance: /rho/" + std::to_string(s) + " is negative");
    if (std::abs(rho.sum() - 1.0) > kStochasticTol)
        throw ModelError("instance: /rho does not sum to 1");

    const auto& kernel_node = array_at(field(doc, "kernel"), ns, "/kernel");
    Matrix kernel(Eigen::Index(ns * na), Eigen::Index(ns));
    for (std::size_t s = 0; s < ns; ++s) {
        const std::string ps = "/kernel/" + std::to_string(s);
        array_at(kernel_node[s], na, ps);
        for (std::size_t a = 0; a < na; ++a) {
            const std::string pa = ps + "/" + std::to_string(a);
            const Vector row = vector_at(kernel_node[s][a], ns, pa);
            for (std::size_t t = 0; t < ns; ++t)
                if (row[Eigen::Index(t)] < 0.0)
                    throw ModelError("instance: " + pa + "/" + std::to_string(t) +
                                     " is negative");
            if (std::abs(row.sum() - 1.0) > kStochasticTol)
                throw ModelError("instance: " + pa + " does not sum to 1");
            kernel.row(Eigen::Index(s * na + a)) = row.transpose();
        }
    }

    const auto& rewards_node = array_at(field(doc, "rewards"), m + 1, "/rewards");
    std::vector<RewardTable> rewards;
    for (std::size_t i = 0; i <= m; ++i) {
        const std::string pi = "/rewards/" + std::to_string(i);
        array_at(rewards_node[i], ns, pi);
        RewardTable r = RewardTable::Zero(Eigen::Index(ns), Eigen::Index(na));
        for (std::size_t s = 0; s < ns; ++s) {
            const std::string prs = pi + "/" + std::to_string(s);
            const Vector row = vector_at(rewards_node[i][s], na, prs);
            for (std::size_t a = 0; a < na; ++a)
                if (row[Eigen::Index(a)] < 0.0)
                    throw ModelError("instance: " + prs + "/" + std::to_string(a) +
                                     " is negative");
            r.row(Eigen::Index(s)) = row.transpose();
        }
        rewards.push_back(std::move(r));
    }

    return TabularCmdp(Eigen::Index(ns), Eigen::Index(na), std::move(kernel), std::move(rewards),
                       std::move(thresholds), gamma, std::move(rho));
}

inline nlohmann::json to_json(const Vector& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

inline nlohmann::json to_json(const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline nlohmann::json cmdp_to_json(const TabularCmdp& cmdp) {
    nlohmann::json doc;
    doc["n_states"] = cmdp.n_states();
    doc["n_actions"] = cmdp.n_actions();
    doc["gamma"] = cmdp.gamma();
    doc["rho"] = to_json(cmdp.rho());
    nlohmann::json kernel = nlohmann::json::array();
    for (Eigen::Index s = 0; s < cmdp.n_states(); ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (Eigen::Index a = 0; a < cmdp.n_actions(); ++a)
            per_action.push_back(to_json(Vector(cmdp.transition(s, a).transpose())));
        kernel.push_back(std::move(per_action));
    }
    doc["kernel"] = std::move(kernel);
    nlohmann::json rewards = nlohmann::json::array();
    for (const auto& r : cmdp.rewards())
        rewards.push_back(to_json(Matrix(r)));
    doc["rewards"] = std::move(rewards);
    doc["thresholds"] = to_json(cmdp.thresholds());
    return doc;
}

/// Reads an instance file. Syntax errors carry the parser's line/column.
inline TabularCmdp load_cmdp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ModelError("instance: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelError("instance: " + path + ": " + e.what());
    }
    return cmdp_from_json(doc);
}

inline void save_cmdp(const TabularCmdp& cmdp, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ModelError("instance: cannot write " + path);
    out << cmdp_to_json(cmdp).dump(2) << '\n';
}

} // namespace cpcmdp
