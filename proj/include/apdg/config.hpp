/*
 Copyright 2026 The apdg-dmpc Authors

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
#ifndef APDG_CONFIG_HPP
#define APDG_CONFIG_HPP

// Experiment configuration files.
//
// Text format: `[section]` headers, `key = value` lines, `#` comments.
// Matrices are written `rows cols : v11 v12 ... ` in row-major order and
// polytopes either as `X_G`/`X_h` pairs or as `X_box = lo1 hi1 lo2 hi2 ...`.
// Subsystem sections are `[subsystem k]` with k starting at 1; graph edges
// are 1-based `from->to` pairs. A file whose first non-blank character is
// `{` is read as JSON with the same keys.

#include "apdg/common.hpp"
#include "apdg/dmpc.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace apdg {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Entry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, Entry>;

[[noreturn]] inline void parse_fail(int line, const std::string& what) {
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what);
}

inline std::vector<double> numbers(const Entry& e) {
    std::vector<double> out;
    std::istringstream is(e.value);
    std::string tok;
    while (is >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            parse_fail(e.line, "expected a number, found '" + tok + "'");
        }
        if (used != tok.size()) parse_fail(e.line, "expected a number, found '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

inline double scalar(const Entry& e) {
    const auto v = numbers(e);
    if (v.size() != 1) parse_fail(e.line, "expected exactly one number");
    return v.front();
}

inline long integer(const Entry& e) {
    const double v = scalar(e);
    if (v != static_cast<double>(static_cast<long>(v))) parse_fail(e.line, "expected an integer");
    return static_cast<long>(v);
}

inline Matrix matrix(const Entry& e) {
    const auto colon = e.value.find(':');
    if (colon == std::string::npos) parse_fail(e.line, "matrix must be written 'rows cols : values'");
    const auto dims = numbers(Entry{e.value.substr(0, colon), e.line});
    if (dims.size() != 2 || dims[0] < 0 || dims[1] < 0) parse_fail(e.line, "matrix needs two nonnegative dimensions");
    const auto vals = numbers(Entry{e.value.substr(colon + 1), e.line});
    const int r = static_cast<int>(dims[0]);
    const int c = static_cast<int>(dims[1]);
    if (static_cast<int>(vals.size()) != r * c) {
        parse_fail(e.line, "matrix " + std::to_string(r) + "x" + std::to_string(c) + " needs " +
                               std::to_string(r * c) + " values, found " + std::to_string(vals.size()));
    }
    Matrix m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) m(i, j) = vals[static_cast<std::size_t>(i * c + j)];
    }
    return m;
}

inline Vector vec(const Entry& e) {
    const auto v = numbers(e);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::string write_matrix(const Matrix& m) {
    std::string s = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " :";
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) s += " " + fmt_double(m(i, j));
    }
    return s;
}

inline std::string write_vec(const Vector& v) {
    std::string s;
    for (int i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt_double(v(i));
    return s;
}

class Reader {
public:
    explicit Reader(const Section& sec, std::string name, int header_line)
        : sec_(sec), name_(std::move(name)), header_line_(header_line) {}

    bool has(const std::string& key) const { return sec_.count(key) != 0; }

    const Entry& get(const std::string& key) const {
        const auto it = sec_.find(key);
        if (it == sec_.end()) parse_fail(header_line_, "section [" + name_ + "] is missing '" + key + "'");
        used_.insert(key);
        return it->second;
    }

    void check_unused() const {
        for (const auto& [key, entry] : sec_) {
            if (!used_.count(key)) parse_fail(entry.line, "unknown key '" + key + "' in [" + name_ + "]");
        }
    }

    Polytope polytope(const std::string& prefix) const {
        if (has(prefix + "_box")) {
            const Entry& e = get(prefix + "_box");
            const auto v = numbers(e);
            if (v.empty() || v.size() % 2) parse_fail(e.line, prefix + "_box needs lo/hi pairs");
            Vector lo(static_cast<Eigen::Index>(v.size() / 2)), hi(lo.size());
            for (std::size_t k = 0; k < v.size() / 2; ++k) {
                lo(static_cast<Eigen::Index>(k)) = v[2 * k];
                hi(static_cast<Eigen::Index>(k)) = v[2 * k + 1];
                if (v[2 * k] > v[2 * k + 1]) parse_fail(e.line, prefix + "_box has lo > hi");
            }
            return Polytope::box(lo, hi);
        }
        const Matrix G = matrix(get(prefix + "_G"));
        const Entry& he = get(prefix + "_h");
        const Vector h = vec(he);
        if (h.size() != G.rows()) parse_fail(he.line, prefix + "_h must have one entry per row of " + prefix + "_G");
        return Polytope(G, h);
    }

private:
    const Section& sec_;
    std::string name_;
    int header_line_;
    mutable std::set<std::string> used_;
};

inline std::pair<int, int> parse_edge(const std::string& tok, int line) {
    const auto arrow = tok.find("->");
    if (arrow == std::string::npos) parse_fail(line, "edge '" + tok + "' must be written from->to");
    try {
        return {std::stoi(tok.substr(0, arrow)) - 1, std::stoi(tok.substr(arrow + 2)) - 1};
    } catch (const std::exception&) {
        parse_fail(line, "edge '" + tok + "' must use integer node ids");
    }
}

} // namespace detail

/// Parses the text format. Throws Error{Parse} with the offending line, then Error{ConfigInvalid} from validation.
inline DmpcConfig parse_config_text(const std::string& text) {
    using namespace detail;
    std::map<std::string, std::pair<Section, int>> sections;
    std::string current;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(line_no, "unterminated section header");
            current = trim(line.substr(1, line.size() - 2));
            if (sections.count(current)) parse_fail(line_no, "duplicate section [" + current + "]");
            sections[current] = {Section{}, line_no};
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) parse_fail(line_no, "expected 'key = value'");
        if (current.empty()) parse_fail(line_no, "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        auto& sec = sections[current].first;
        if (sec.count(key)) parse_fail(line_no, "duplicate key '" + key + "'");
        sec[key] = Entry{trim(line.substr(eq + 1)), line_no};
    }

    auto section = [&](const std::string& name) -> std::pair<Section, int>& {
        const auto it = sections.find(name);
        if (it == sections.end()) parse_fail(line_no, "missing section [" + name + "]");
        return it->second;
    };

    DmpcConfig cfg;
    {
        auto& [sec, ln] = section("global");
        Reader r(sec, "global", ln);
        cfg.N = static_cast<int>(integer(r.get("N")));
        cfg.gamma = scalar(r.get("gamma"));
        cfg.eps = scalar(r.get("eps"));
        cfg.eps_b = scalar(r.get("eps_b"));
        cfg.eps_g = scalar(r.get("eps_g"));
        cfg.beta = scalar(r.get("beta"));
        cfg.seed = static_cast<std::uint64_t>(integer(r.get("seed")));
        cfg.T_sim = static_cast<int>(integer(r.get("steps")));
        if (r.has("local_cap")) cfg.local_cap = integer(r.get("local_cap"));
        r.check_unused();
    }
    {
        auto& [sec, ln] = section("schedule");
        Reader r(sec, "schedule", ln);
        cfg.schedule.tau_lo = scalar(r.get("tau_lo"));
        cfg.schedule.tau_hi = scalar(r.get("tau_hi"));
        cfg.schedule.tau_delay = scalar(r.get("delay"));
        if (r.has("speed")) cfg.schedule.speed = numbers(r.get("speed"));
        if (r.has("mode")) {
            const Entry& e = r.get("mode");
            if (e.value == "async") cfg.schedule.mode = SyncMode::Async;
            else if (e.value == "synchronous") cfg.schedule.mode = SyncMode::Synchronous;
            else parse_fail(e.line, "mode must be 'async' or 'synchronous'");
        }
        r.check_unused();
    }
    if (sections.count("qp")) {
        auto& [sec, ln] = sections["qp"];
        Reader r(sec, "qp", ln);
        if (r.has("kkt_tol")) cfg.qp.kkt_tol = scalar(r.get("kkt_tol"));
        if (r.has("feas_tol")) cfg.qp.feas_tol = scalar(r.get("feas_tol"));
        if (r.has("max_iter")) cfg.qp.max_iter = integer(r.get("max_iter"));
        r.check_unused();
    }
    if (sections.count("certificate")) {
        auto& [sec, ln] = sections["certificate"];
        Reader r(sec, "certificate", ln);
        if (r.has("c9")) cfg.c9 = scalar(r.get("c9"));
        if (r.has("pi4")) cfg.pi4 = scalar(r.get("pi4"));
        r.check_unused();
    }
    int M = 0;
    {
        auto& [sec, ln] = section("graph");
        Reader r(sec, "graph", ln);
        M = static_cast<int>(integer(r.get("nodes")));
        if (M < 1) parse_fail(r.get("nodes").line, "nodes must be at least 1");
        if (r.has("edges")) {
            const Entry& e = r.get("edges");
            std::string list = e.value;
            for (char& ch : list) {
                if (ch == ',') ch = ' ';
            }
            std::istringstream es(list);
            std::string tok;
            while (es >> tok) cfg.edges.push_back(parse_edge(tok, e.line));
        }
        r.check_unused();
    }
    for (int i = 1; i <= M; ++i) {
        const std::string name = "subsystem " + std::to_string(i);
        auto& [sec, ln] = section(name);
        Reader r(sec, name, ln);
        LtiSubsystem sys;
        sys.A = matrix(r.get("A"));
        sys.B = matrix(r.get("B"));
        sys.Q = matrix(r.get("Q"));
        sys.R = matrix(r.get("R"));
        sys.X = r.polytope("X");
        sys.U = r.polytope("U");
        sys.Cg = matrix(r.get("Cg"));
        sys.Dg = matrix(r.get("Dg"));
        cfg.x0.push_back(vec(r.get("x0")));
        cfg.subsystems.push_back(std::move(sys));
        r.check_unused();
    }
    for (const auto& [name, sec] : sections) {
        const bool known = name == "global" || name == "schedule" || name == "qp" || name == "certificate" ||
                           name == "graph" ||
                           (name.rfind("subsystem ", 0) == 0 && [&] {
                               try {
                                   const int k = std::stoi(name.substr(10));
                                   return k >= 1 && k <= M && name == "subsystem " + std::to_string(k);
                               } catch (const std::exception&) {
                                   return false;
                               }
                           }());
        if (!known) parse_fail(sec.second, "unknown section [" + name + "]");
    }
    cfg.validate();
    return cfg;
}

/// Normalized text form; parse_config_text(write_config_text(c)) reproduces c exactly.
inline std::string write_config_text(const DmpcConfig& cfg) {
    using namespace detail;
    std::ostringstream os;
    os << "[global]\n";
    os << "N = " << cfg.N << "\n";
    os << "gamma = " << fmt_double(cfg.gamma) << "\n";
    os << "eps = " << fmt_double(cfg.eps) << "\n";
    os << "eps_b = " << fmt_double(cfg.eps_b) << "\n";
    os << "eps_g = " << fmt_double(cfg.eps_g) << "\n";
    os << "beta = " << fmt_double(cfg.beta) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "steps = " << cfg.T_sim << "\n";
    os << "local_cap = " << cfg.local_cap << "\n\n";
    os << "[schedule]\n";
    os << "tau_lo = " << fmt_double(cfg.schedule.tau_lo) << "\n";
    os << "tau_hi = " << fmt_double(cfg.schedule.tau_hi) << "\n";
    os << "delay = " << fmt_double(cfg.schedule.tau_delay) << "\n";
    if (!cfg.schedule.speed.empty()) {
        os << "speed =";
        for (double s : cfg.schedule.speed) os << " " << fmt_double(s);
        os << "\n";
    }
    os << "mode = " << (cfg.schedule.mode == SyncMode::Async ? "async" : "synchronous") << "\n\n";
    os << "[qp]\n";
    os << "kkt_tol = " << fmt_double(cfg.qp.kkt_tol) << "\n";
    os << "feas_tol = " << fmt_double(cfg.qp.feas_tol) << "\n";
    os << "max_iter = " << cfg.qp.max_iter << "\n\n";
    os << "[certificate]\n";
    if (cfg.c9) os << "c9 = " << fmt_double(*cfg.c9) << "\n";
    os << "pi4 = " << fmt_double(cfg.pi4) << "\n\n";
    os << "[graph]\n";
    os << "nodes = " << cfg.M() << "\n";
    if (!cfg.edges.empty()) {
        os << "edges =";
        for (std::size_t k = 0; k < cfg.edges.size(); ++k) {
            os << (k ? ", " : " ") << cfg.edges[k].first + 1 << "->" << cfg.edges[k].second + 1;
        }
        os << "\n";
    }
    for (int i = 0; i < cfg.M(); ++i) {
        const auto& s = cfg.subsystems[static_cast<std::size_t>(i)];
        os << "\n[subsystem " << i + 1 << "]\n";
        os << "A = " << write_matrix(s.A) << "\n";
        os << "B = " << write_matrix(s.B) << "\n";
        os << "Q = " << write_matrix(s.Q) << "\n";
        os << "R = " << write_matrix(s.R) << "\n";
        os << "X_G = " << write_matrix(s.X.G) << "\n";
        os << "X_h = " << write_vec(s.X.h) << "\n";
        os << "U_G = " << write_matrix(s.U.G) << "\n";
        os << "U_h = " << write_vec(s.U.h) << "\n";
        os << "Cg = " << write_matrix(s.Cg) << "\n";
        os << "Dg = " << write_matrix(s.Dg) << "\n";
        os << "x0 = " << write_vec(cfg.x0[static_cast<std::size_t>(i)]) << "\n";
    }
    return os.str();
}

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline nlohmann::json vector_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Matrix json_matrix(const nlohmann::json& j, const std::string& where) {
    try {
        const int r = j.at("rows").get<int>();
        const int c = j.at("cols").get<int>();
        const auto& data = j.at("data");
        if (static_cast<int>(data.size()) != r) throw Error(ErrorCode::Parse, where + ": wrong number of rows");
        Matrix m(r, c);
        for (int i = 0; i < r; ++i) {
            if (static_cast<int>(data[static_cast<std::size_t>(i)].size()) != c) {
                throw Error(ErrorCode::Parse, where + ": wrong number of columns");
            }
            for (int k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, where + ": " + e.what());
    }
}

inline Vector json_vector(const nlohmann::json& j, const std::string& where) {
    try {
        const auto v = j.get<std::vector<double>>();
        return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, where + ": " + e.what());
    }
}

} // namespace detail

inline nlohmann::json config_to_json(const DmpcConfig& cfg) {
    using namespace detail;
    nlohmann::json j;
    j["global"] = {{"N", cfg.N},         {"gamma", cfg.gamma}, {"eps", cfg.eps},      {"eps_b", cfg.eps_b},
                   {"eps_g", cfg.eps_g}, {"beta", cfg.beta},   {"seed", cfg.seed},    {"steps", cfg.T_sim},
                   {"local_cap", cfg.local_cap}};
    j["schedule"] = {{"tau_lo", cfg.schedule.tau_lo},
                     {"tau_hi", cfg.schedule.tau_hi},
                     {"delay", cfg.schedule.tau_delay},
                     {"speed", cfg.schedule.speed},
                     {"mode", cfg.schedule.mode == SyncMode::Async ? "async" : "synchronous"}};
    j["qp"] = {{"kkt_tol", cfg.qp.kkt_tol}, {"feas_tol", cfg.qp.feas_tol}, {"max_iter", cfg.qp.max_iter}};
    j["certificate"] = {{"pi4", cfg.pi4}};
    if (cfg.c9) j["certificate"]["c9"] = *cfg.c9;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [from, to] : cfg.edges) edges.push_back({from + 1, to + 1});
    j["graph"] = {{"nodes", cfg.M()}, {"edges", edges}};
    nlohmann::json subs = nlohmann::json::array();
    for (int i = 0; i < cfg.M(); ++i) {
        const auto& s = cfg.subsystems[static_cast<std::size_t>(i)];
        subs.push_back({{"A", matrix_json(s.A)},
                        {"B", matrix_json(s.B)},
                        {"Q", matrix_json(s.Q)},
                        {"R", matrix_json(s.R)},
                        {"X_G", matrix_json(s.X.G)},
                        {"X_h", vector_json(s.X.h)},
                        {"U_G", matrix_json(s.U.G)},
                        {"U_h", vector_json(s.U.h)},
                        {"Cg", matrix_json(s.Cg)},
                        {"Dg", matrix_json(s.Dg)},
                        {"x0", vector_json(cfg.x0[static_cast<std::size_t>(i)])}});
    }
    j["subsystems"] = subs;
    return j;
}

inline DmpcConfig config_from_json(const nlohmann::json& j) {
    using namespace detail;
    DmpcConfig cfg;
    try {
        const auto& g = j.at("global");
        cfg.N = g.at("N").get<int>();
        cfg.gamma = g.at("gamma").get<double>();
        cfg.eps = g.at("eps").get<double>();
        cfg.eps_b = g.at("eps_b").get<double>();
        cfg.eps_g = g.at("eps_g").get<double>();
        cfg.beta = g.at("beta").get<double>();
        cfg.seed = g.at("seed").get<std::uint64_t>();
        cfg.T_sim = g.at("steps").get<int>();
        cfg.local_cap = g.value("local_cap", cfg.local_cap);
        const auto& s = j.at("schedule");
        cfg.schedule.tau_lo = s.at("tau_lo").get<double>();
        cfg.schedule.tau_hi = s.at("tau_hi").get<double>();
        cfg.schedule.tau_delay = s.at("delay").get<double>();
        cfg.schedule.speed = s.value("speed", std::vector<double>{});
        const std::string mode = s.value("mode", std::string("async"));
        if (mode != "async" && mode != "synchronous") throw Error(ErrorCode::Parse, "schedule.mode: unknown mode");
        cfg.schedule.mode = mode == "async" ? SyncMode::Async : SyncMode::Synchronous;
        if (j.contains("qp")) {
            const auto& q = j.at("qp");
            cfg.qp.kkt_tol = q.value("kkt_tol", cfg.qp.kkt_tol);
            cfg.qp.feas_tol = q.value("feas_tol", cfg.qp.feas_tol);
            cfg.qp.max_iter = q.value("max_iter", cfg.qp.max_iter);
        }
        if (j.contains("certificate")) {
            const auto& c = j.at("certificate");
            if (c.contains("c9")) cfg.c9 = c.at("c9").get<double>();
            cfg.pi4 = c.value("pi4", cfg.pi4);
        }
        const auto& gr = j.at("graph");
        const int M = gr.at("nodes").get<int>();
        for (const auto& e : gr.value("edges", nlohmann::json::array())) {
            cfg.edges.emplace_back(e.at(0).get<int>() - 1, e.at(1).get<int>() - 1);
        }
        const auto& subs = j.at("subsystems");
        if (static_cast<int>(subs.size()) != M) throw Error(ErrorCode::Parse, "subsystems: expected one entry per node");
        for (int i = 0; i < M; ++i) {
            const auto& sj = subs[static_cast<std::size_t>(i)];
            const std::string where = "subsystems[" + std::to_string(i) + "]";
            LtiSubsystem sys;
            sys.A = json_matrix(sj.at("A"), where + ".A");
            sys.B = json_matrix(sj.at("B"), where + ".B");
            sys.Q = json_matrix(sj.at("Q"), where + ".Q");
            sys.R = json_matrix(sj.at("R"), where + ".R");
            sys.X = Polytope(json_matrix(sj.at("X_G"), where + ".X_G"), json_vector(sj.at("X_h"), where + ".X_h"));
            sys.U = Polytope(json_matrix(sj.at("U_G"), where + ".U_G"), json_vector(sj.at("U_h"), where + ".U_h"));
            sys.Cg = json_matrix(sj.at("Cg"), where + ".Cg");
            sys.Dg = json_matrix(sj.at("Dg"), where + ".Dg");
            cfg.x0.push_back(json_vector(sj.at("x0"), where + ".x0"));
            cfg.subsystems.push_back(std::move(sys));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("json: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

/// Reads either format, deciding by the first non-blank character. A JSON
/// document may wrap the configuration under a "config" key, as the CLI emits it.
inline DmpcConfig parse_config(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::Parse, std::string("json: ") + e.what());
        }
        return config_from_json(j.contains("config") ? j.at("config") : j);
    }
    return parse_config_text(text);
}

inline DmpcConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Parse, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace apdg

#endif // APDG_CONFIG_HPP
