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
#ifndef APDG_NETSIM_HPP
#define APDG_NETSIM_HPP

#include "apdg/apdg.hpp"
#include "apdg/common.hpp"
#include "apdg/qp.hpp"
#include "apdg/schedule.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace apdg {

/// Fixed digraph with implicit self-loops; weights a_ij = 1 / |N_out(j)|.
struct Digraph {
    int M = 0;
    std::vector<std::pair<int, int>> edges; ///< (from, to), 0-based, self-loops excluded
    std::vector<std::vector<int>> out;      ///< out-neighbors including self, ascending
    std::vector<std::vector<int>> in;       ///< in-neighbors including self, ascending

    int out_degree(int node) const { return static_cast<int>(out.at(static_cast<std::size_t>(node)).size()); }

    double weight(int receiver, int sender) const {
        const auto& nb = in.at(static_cast<std::size_t>(receiver));
        return std::binary_search(nb.begin(), nb.end(), sender) ? 1.0 / out_degree(sender) : 0.0;
    }

    Matrix weight_matrix() const {
        Matrix Wm = Matrix::Zero(M, M);
        for (int i = 0; i < M; ++i) {
            for (int j : in[static_cast<std::size_t>(i)]) Wm(i, j) = 1.0 / out_degree(j);
        }
        return Wm;
    }
};

/// Builds a digraph from 0-based edges. Duplicates and explicit self-loops are ignored.
inline Digraph make_digraph(int M, const std::vector<std::pair<int, int>>& edges) {
    if (M < 1) throw Error(ErrorCode::ConfigInvalid, "graph: at least one node is required");
    Digraph g;
    g.M = M;
    std::set<std::pair<int, int>> unique;
    for (const auto& [from, to] : edges) {
        if (from < 0 || from >= M || to < 0 || to >= M) {
            throw Error(ErrorCode::ConfigInvalid,
                        "graph: edge " + std::to_string(from + 1) + "->" + std::to_string(to + 1) + " out of range");
        }
        if (from != to) unique.emplace(from, to);
    }
    g.edges.assign(unique.begin(), unique.end());
    g.out.assign(static_cast<std::size_t>(M), {});
    g.in.assign(static_cast<std::size_t>(M), {});
    for (int i = 0; i < M; ++i) {
        g.out[static_cast<std::size_t>(i)].push_back(i);
        g.in[static_cast<std::size_t>(i)].push_back(i);
    }
    for (const auto& [from, to] : g.edges) {
        g.out[static_cast<std::size_t>(from)].push_back(to);
        g.in[static_cast<std::size_t>(to)].push_back(from);
    }
    for (auto& v : g.out) std::sort(v.begin(), v.end());
    for (auto& v : g.in) std::sort(v.begin(), v.end());
    return g;
}

struct GraphDiagnostics {
    bool strongly_connected = false;
    double abar = 0.0;                   ///< smallest positive weight
    double stochasticity_residual = 0.0; ///< max_j |sum_i a_ij - 1|
};

inline GraphDiagnostics graph_diagnostics(const Digraph& g) {
    auto reaches_all = [&](const std::vector<std::vector<int>>& adj) {
        std::vector<char> seen(static_cast<std::size_t>(g.M), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int nb : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(nb)]) {
                    seen[static_cast<std::size_t>(nb)] = 1;
                    ++count;
                    stack.push_back(nb);
                }
            }
        }
        return count == g.M;
    };
    GraphDiagnostics out;
    out.strongly_connected = reaches_all(g.out) && reaches_all(g.in);
    out.abar = 1.0;
    for (int j = 0; j < g.M; ++j) {
        out.abar = std::min(out.abar, 1.0 / g.out_degree(j));
    }
    const Matrix Wm = g.weight_matrix();
    out.stochasticity_residual = (Wm.colwise().sum().array() - 1.0).abs().maxCoeff();
    return out;
}

/// Throws Error{NotStronglyConnected} unless every node reaches every other.
inline GraphDiagnostics validate_graph(const Digraph& g) {
    GraphDiagnostics d = graph_diagnostics(g);
    if (!d.strongly_connected) {
        throw Error(ErrorCode::NotStronglyConnected, "validate_graph: digraph is not strongly connected");
    }
    return d;
}

enum class EventKind { Activation, Delivery };

struct TraceRow {
    double time = 0.0;
    EventKind kind = EventKind::Activation;
    int node = 0;
    long k_local = 0;
    long s = 0;
    double lambda_norm = 0.0;
    double grad_norm = 0.0;
    bool l = false;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    std::ostringstream buf;
    buf << std::setprecision(17);
    buf << "time,kind,node,k_local,s,lambda_norm,grad_norm,l\n";
    for (const auto& r : rows) {
        buf << r.time << ',' << (r.kind == EventKind::Activation ? "activation" : "delivery") << ',' << r.node + 1
            << ',' << r.k_local << ',' << r.s << ',' << r.lambda_norm << ',' << r.grad_norm << ',' << (r.l ? 1 : 0)
            << '\n';
    }
    os << buf.str();
}

/// What a node does after its termination test passes.
enum class AfterTermination {
    Relay,  ///< latch the output, keep mixing and forwarding with a frozen gradient
    Retain, ///< stop entirely; receivers keep reusing its last message
};

struct SimOptions {
    double beta = 0.08;
    TerminationParams termination;
    bool use_termination = true;
    long max_global_iter = 0;    ///< 0 means no limit; reaching it ends the run without error
    long local_cap = 100000;     ///< per-node local iterations; exceeding it throws IterationCap
    bool record_trace = false;
    /// Start the tracker at the true local gradient at lambda_0 instead of zero.
    bool exact_initial_gradient = true;
    AfterTermination after_termination = AfterTermination::Relay;
};

/// Mass carried by messages not yet consumed (in flight or buffered), weighted by a_ij.
struct NetworkMass {
    double y = 0.0;
    Vector z;
    Vector d;
};

/**
 * Discrete-event simulation of the asynchronous method on a fixed digraph.
 *
 * Events are ordered by (time, node, sequence number). In asynchronous mode
 * node i activates every U[tau_lo, tau_hi] * speed_i seconds; in synchronous
 * mode every live node activates at a common round time and the next round
 * starts after the slowest interval plus the longest delay of the round.
 */
class ApdgSimulator {
public:
    using Observer = std::function<void(const ApdgSimulator&)>;

    ApdgSimulator(Digraph graph, std::span<const LocalProblem> problems, Schedule schedule, std::uint64_t seed,
                  SimOptions opts)
        : graph_(std::move(graph)), problems_(problems.begin(), problems.end()), schedule_(std::move(schedule)),
          opts_(opts), rng_(seed) {
        const int M = graph_.M;
        require_dims(static_cast<int>(problems_.size()) == M, "run_apdg: one local problem per node is required");
        if (!schedule_.speed.empty() && static_cast<int>(schedule_.speed.size()) != M) {
            throw Error(ErrorCode::ConfigInvalid, "schedule: speed list must have one entry per node");
        }
        if (!(schedule_.tau_lo > 0.0) || schedule_.tau_hi < schedule_.tau_lo || schedule_.tau_delay < 0.0) {
            throw Error(ErrorCode::ConfigInvalid, "schedule: need 0 < tau_lo <= tau_hi and tau_delay >= 0");
        }
        validate_graph(graph_);
        const int dim = problems_.front().dual_dim();
        for (const auto& p : problems_) {
            require_dims(p.dual_dim() == dim, "run_apdg: coupling dimension differs between nodes");
        }
        states_.assign(static_cast<std::size_t>(M), DualNodeState::initial(dim));
        if (opts_.exact_initial_gradient) {
            for (int i = 0; i < M; ++i) {
                auto& st = states_[static_cast<std::size_t>(i)];
                const auto& p = problems_[static_cast<std::size_t>(i)];
                st.u = p.best_response(st.lambda);
                st.grad_prev = p.gradient(st.u);
                st.d = st.grad_prev;
            }
        }
        buffers_.assign(static_cast<std::size_t>(M), {});
        finish_time_.assign(static_cast<std::size_t>(M), -1.0);
        injected_ = Vector::Zero(dim);
        last_alpha_.assign(static_cast<std::size_t>(M), 0.0);

        for (int i = 0; i < M; ++i) broadcast(i, 0.0);
        if (schedule_.mode == SyncMode::Async) {
            for (int i = 0; i < M; ++i) schedule_activation(i, draw_interval(i));
        } else {
            schedule_round(0.0);
        }
    }

    /// Processes events until every node has terminated or a stop limit is hit.
    void run(const Observer& observer = {}) {
        while (!done() && !queue_.empty()) {
            step();
            if (observer) observer(*this);
        }
    }

    /// Processes one event. Returns false once the queue is exhausted.
    bool step() {
        if (queue_.empty()) return false;
        const auto it = queue_.begin();
        const Key key = *it;
        queue_.erase(it);
        now_ = std::get<0>(key);
        last_node_ = std::get<1>(key);
        const auto msg_it = in_flight_.find(std::get<2>(key));
        if (msg_it != in_flight_.end()) {
            last_kind_ = EventKind::Delivery;
            buffers_[static_cast<std::size_t>(last_node_)].push_back(std::move(msg_it->second));
            in_flight_.erase(msg_it);
        } else {
            last_kind_ = EventKind::Activation;
            activate(last_node_);
        }
        if (opts_.record_trace) record(last_kind_, last_node_);
        return true;
    }

    bool done() const {
        if (opts_.max_global_iter > 0 && global_k_ >= opts_.max_global_iter) return true;
        return live_count() == 0;
    }

    int live_count() const {
        int live = 0;
        for (const auto& st : states_) live += st.terminated ? 0 : 1;
        return live;
    }

    double time() const { return now_; }
    EventKind last_kind() const { return last_kind_; }
    int last_node() const { return last_node_; }
    long global_iterations() const { return global_k_; }
    double last_alpha(int node) const { return last_alpha_.at(static_cast<std::size_t>(node)); }
    const std::vector<DualNodeState>& states() const { return states_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    const Digraph& graph() const { return graph_; }

    /// Time each node terminated, -1 while it is still running.
    const std::vector<double>& finish_times() const { return finish_time_; }
    double finish_time() const {
        double t = 0.0;
        for (double f : finish_time_) t = std::max(t, f);
        return t;
    }

    /// Running sum of alpha * d_old taken out of z by all updates so far.
    const Vector& injected_z() const { return injected_; }

    NetworkMass unconsumed_mass() const {
        NetworkMass mass;
        const int dim = static_cast<int>(injected_.size());
        mass.z = Vector::Zero(dim);
        mass.d = Vector::Zero(dim);
        auto add = [&](const Message& m) {
            mass.y += m.weight * m.y;
            mass.z += m.weight * m.z;
            mass.d += m.weight * m.d;
        };
        for (const auto& [seq, m] : in_flight_) add(m);
        for (const auto& buf : buffers_) {
            for (const auto& m : buf) add(m);
        }
        return mass;
    }

    Vector gradient_sum() const {
        Vector sum = Vector::Zero(injected_.size());
        for (const auto& st : states_) sum += st.grad_prev;
        return sum;
    }

private:
    using Key = std::tuple<double, int, std::uint64_t>;

    double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    double draw_interval(int node) {
        const double lo = schedule_.tau_lo * schedule_.multiplier(node);
        const double hi = schedule_.tau_hi * schedule_.multiplier(node);
        return lo + (hi - lo) * uniform01();
    }

    void schedule_activation(int node, double at) { queue_.emplace(at, node, next_seq_++); }

    void schedule_round(double start) {
        double longest = 0.0;
        for (int i = 0; i < graph_.M; ++i) longest = std::max(longest, draw_interval(i));
        const double at = start + longest + round_delay_;
        round_delay_ = 0.0;
        round_pending_ = 0;
        for (int i = 0; i < graph_.M; ++i) {
            if (active(i)) {
                schedule_activation(i, at);
                ++round_pending_;
            }
        }
    }

    void broadcast(int sender, double at) {
        const auto& st = states_[static_cast<std::size_t>(sender)];
        const double weight = 1.0 / graph_.out_degree(sender);
        for (int receiver : graph_.out[static_cast<std::size_t>(sender)]) {
            Message m;
            m.sender = sender;
            m.receiver = receiver;
            m.weight = weight;
            m.z = st.z;
            m.y = st.y;
            m.d = st.d;
            m.s = st.s;
            m.terminated = st.terminated;
            m.send_time = at;
            double deliver = at;
            if (receiver != sender) {
                deliver = at + schedule_.tau_delay * uniform01();
                double& last = fifo_[{sender, receiver}];
                deliver = std::max(deliver, last);
                last = deliver;
            }
            round_delay_ = std::max(round_delay_, deliver - at);
            m.deliver_time = deliver;
            m.seq = next_seq_++;
            queue_.emplace(deliver, receiver, m.seq);
            in_flight_.emplace(m.seq, std::move(m));
        }
    }

    bool relaying() const { return opts_.after_termination == AfterTermination::Relay; }

    /// Whether the node still takes part in activations.
    bool active(int node) const { return relaying() || !states_[static_cast<std::size_t>(node)].terminated; }

    void next_activation(int node) {
        if (schedule_.mode == SyncMode::Async) {
            if (active(node)) schedule_activation(node, now_ + draw_interval(node));
        } else if (--round_pending_ == 0 && live_count() > 0) {
            schedule_round(now_);
        }
    }

    void activate(int node) {
        auto& st = states_[static_cast<std::size_t>(node)];
        if (!active(node)) return;
        if (now_ > last_activation_time_ || global_k_ == 0) {
            ++global_k_;
            last_activation_time_ = now_;
        }
        auto& buf = buffers_[static_cast<std::size_t>(node)];
        if (st.terminated) {
            UpdateResult res = relay_update(st, buf, opts_.beta);
            injected_ += res.alpha * st.d;
            last_alpha_[static_cast<std::size_t>(node)] = res.alpha;
            buf.clear();
            st = std::move(res.state);
            broadcast(node, now_);
            next_activation(node);
            return;
        }
        if (st.k_local >= opts_.local_cap) {
            throw Error(ErrorCode::IterationCap,
                        "run_apdg: node " + std::to_string(node + 1) + " exceeded " + std::to_string(opts_.local_cap) +
                            " local iterations");
        }
        const auto& problem = problems_[static_cast<std::size_t>(node)];
        UpdateResult res = local_update(st, buf, opts_.beta, problem);
        injected_ += res.alpha * st.d;
        last_alpha_[static_cast<std::size_t>(node)] = res.alpha;
        if (relaying()) {
            buf.clear();
        } else {
            std::erase_if(buf, [](const Message& m) { return !m.terminated; });
        }
        // The first test always measures against the share b/M, i.e. a zero initial gradient.
        DualNodeState before = st;
        if (before.k_local == 0) before.grad_prev.setZero();
        if (opts_.use_termination && check_termination(before, res.state, problem, opts_.termination)) {
            res.state.terminated = true;
            finish_time_[static_cast<std::size_t>(node)] = now_;
        }
        st = std::move(res.state);
        broadcast(node, now_);
        next_activation(node);
    }

    void record(EventKind kind, int node) {
        const auto& st = states_[static_cast<std::size_t>(node)];
        trace_.push_back(TraceRow{now_, kind, node, st.k_local, st.s, st.lambda.norm(), st.grad_prev.norm(),
                                  st.terminated});
    }

    Digraph graph_;
    std::vector<LocalProblem> problems_;
    Schedule schedule_;
    SimOptions opts_;
    std::mt19937_64 rng_;

    std::vector<DualNodeState> states_;
    std::vector<std::vector<Message>> buffers_;
    std::map<std::uint64_t, Message> in_flight_;
    std::set<Key> queue_;
    std::map<std::pair<int, int>, double> fifo_;
    std::vector<double> finish_time_;
    std::vector<double> last_alpha_;
    std::vector<TraceRow> trace_;
    Vector injected_;

    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;
    double last_activation_time_ = 0.0;
    long global_k_ = 0;
    EventKind last_kind_ = EventKind::Delivery;
    int last_node_ = 0;
    double round_delay_ = 0.0;
    int round_pending_ = 0;
};

struct SimResult {
    std::vector<DualNodeState> states;
    std::vector<double> finish_times;
    double finish_time = 0.0;
    long global_iterations = 0;
    bool all_terminated = false;
    std::vector<TraceRow> trace;
};

/// Runs the simulation to completion. Identical inputs and seed give an identical trace.
inline SimResult run_apdg(const Digraph& g, std::span<const LocalProblem> problems, const Schedule& schedule,
                          std::uint64_t seed, const SimOptions& opts, const ApdgSimulator::Observer& observer = {}) {
    ApdgSimulator sim(g, problems, schedule, seed, opts);
    sim.run(observer);
    SimResult out;
    out.states = sim.states();
    out.finish_times = sim.finish_times();
    out.finish_time = sim.finish_time();
    out.global_iterations = sim.global_iterations();
    out.all_terminated = sim.live_count() == 0;
    out.trace = sim.trace();
    return out;
}

} // namespace apdg

#endif // APDG_NETSIM_HPP
