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
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace apdg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return text.replace(pos, from.size(), to);
}

void expect_same(const DmpcConfig& a, const DmpcConfig& b) {
    ASSERT_EQ(a.M(), b.M());
    EXPECT_EQ(a.N, b.N);
    EXPECT_EQ(a.gamma, b.gamma);
    EXPECT_EQ(a.eps, b.eps);
    EXPECT_EQ(a.eps_b, b.eps_b);
    EXPECT_EQ(a.eps_g, b.eps_g);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.seed, b.seed);
    EXPECT_EQ(a.T_sim, b.T_sim);
    EXPECT_EQ(a.edges, b.edges);
    EXPECT_EQ(a.schedule.tau_lo, b.schedule.tau_lo);
    EXPECT_EQ(a.schedule.tau_hi, b.schedule.tau_hi);
    EXPECT_EQ(a.schedule.tau_delay, b.schedule.tau_delay);
    EXPECT_EQ(a.schedule.speed, b.schedule.speed);
    EXPECT_EQ(a.schedule.mode, b.schedule.mode);
    for (int i = 0; i < a.M(); ++i) {
        const auto& s = a.subsystems[i];
        const auto& t = b.subsystems[i];
        EXPECT_TRUE(s.A == t.A && s.B == t.B && s.Q == t.Q && s.R == t.R) << i;
        EXPECT_TRUE(s.Cg == t.Cg && s.Dg == t.Dg) << i;
        EXPECT_TRUE(s.X.G == t.X.G && s.X.h == t.X.h && s.U.G == t.U.G && s.U.h == t.U.h) << i;
        EXPECT_TRUE(a.x0[i] == b.x0[i]) << i;
    }
}

std::string error_text(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, WaterTankValues) {
    const auto cfg = apdg::testing::watertank_config();
    EXPECT_EQ(cfg.M(), 4);
    EXPECT_EQ(cfg.N, 8);
    EXPECT_EQ(cfg.gamma, 0.01);
    EXPECT_EQ(cfg.beta, 0.08);
    EXPECT_EQ(cfg.T_sim, 40);
    EXPECT_EQ(cfg.edges.size(), 7u);
    EXPECT_EQ(cfg.edges.front(), (std::pair<int, int>{0, 1}));
    EXPECT_EQ(cfg.schedule.speed, (std::vector<double>{1, 2, 2, 3}));
    EXPECT_EQ(cfg.subsystems[0].A(1, 1), 0.8047);
    EXPECT_EQ(cfg.x0[1](0), 2.0);
}

TEST(Config, TextRoundTripIsExact) {
    const auto cfg = apdg::testing::watertank_config();
    const std::string once = write_config_text(cfg);
    const auto back = parse_config_text(once);
    expect_same(cfg, back);
    EXPECT_EQ(write_config_text(back), once);
}

TEST(Config, JsonRoundTripIsExact) {
    const auto cfg = apdg::testing::watertank_config();
    const auto j = config_to_json(cfg);
    expect_same(cfg, config_from_json(j));
    expect_same(cfg, parse_config(j.dump(2)));
    const nlohmann::json wrapped = {{"config", j}};
    expect_same(cfg, parse_config(wrapped.dump()));
}

TEST(Config, UnknownKeyNamesTheLine) {
    const std::string text = slurp(apdg::testing::source_path("configs/watertank.cfg"));
    const std::string bad = replace_line(text, "beta = 0.08", "beta = 0.08\nbetta = 1");
    const std::string msg = error_text(bad);
    EXPECT_NE(msg.find("unknown key 'betta'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line "), std::string::npos) << msg;
}

TEST(Config, MalformedLinesAreParseErrors) {
    const std::string text = slurp(apdg::testing::source_path("configs/watertank.cfg"));
    for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
             {"[global]", "[global"},
             {"N = 8", "N 8"},
             {"edges = 1->2,", "edges = 1-2,"},
             {"U_box = -1 1", "U_box = 1 -1"},
             {"[graph]", "[grpah]"},
         }) {
        try {
            parse_config_text(replace_line(text, from, to));
            ADD_FAILURE() << "accepted: " << to;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::Parse) << to << ": " << e.what();
        }
    }
}

TEST(Config, ValidationNamesTheField) {
    const std::string text = slurp(apdg::testing::source_path("configs/watertank.cfg"));
    const auto check = [&](const std::string& from, const std::string& to, const std::string& field) {
        try {
            parse_config_text(replace_line(text, from, to));
            ADD_FAILURE() << "accepted: " << to;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << e.what();
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    check("gamma = 0.01", "gamma = 0.5", "gamma");
    check("eps = 0.0005", "eps = 0.05", "eps");
    check("speed = 1 2 2 3", "speed = 1 2 2", "speed");
    check("R = 1 1 : 1", "R = 1 1 : -1", "R");
}

TEST(Config, LineNumbersCountComments) {
    const std::string text = "# comment\n\n[global]\nN = eight\n";
    const std::string msg = error_text(text);
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}
