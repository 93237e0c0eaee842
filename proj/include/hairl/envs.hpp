// Desk-scale environments with ground-truth rewards for evaluation, the
// tabulated MDP used by the exact oracles, expert policy generators, and
// demonstration dataset I/O.
#pragma once

#include <algorithm>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "hairl/core.hpp"

#include "json.hpp"

namespace hairl {

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int horizon() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(const std::vector<double>& action, Rng& rng) = 0;
};

// ---------------------------------------------------------------------------
// FourRooms: 9x9 grid, four rooms with one doorway per internal wall segment.
// Deterministic transitions; moving into a wall leaves the state unchanged.
// ---------------------------------------------------------------------------

class FourRooms : public Env {
 public:
  static constexpr int kSize = 9;
  static constexpr int kHorizon = 60;

  explicit FourRooms(int task) : task_(task) {
    if (task != 1 && task != 2) throw ArgumentError("fourrooms task must be 1 or 2");
    goal_ = (task == 1) ? cell(0, 8) : cell(8, 8);
    start_ = cell(8, 0);
  }

  std::string id() const override {
    return task_ == 1 ? "fourrooms-t1" : "fourrooms-t2";
  }
  int state_dim() const override { return 6; }  // (x, y) normalized + room one-hot
  int action_dim() const override { return 4; }
  bool discrete_actions() const override { return true; }
  int horizon() const override { return kHorizon; }

  static int cell(int r, int c) { return r * kSize + c; }
  static int row(int s) { return s / kSize; }
  static int col(int s) { return s % kSize; }

  static bool is_door(int r, int c) {
    return (r == 4 && c == 2) || (r == 4 && c == 6) || (r == 2 && c == 4) ||
           (r == 6 && c == 4);
  }
  static bool is_wall(int r, int c) {
    return (r == 4 || c == 4) && !is_door(r, c);
  }

  // 0=up 1=down 2=left 3=right; blocked moves self-transition
  static int next_cell(int s, int a) {
    static const int dr[4] = {-1, 1, 0, 0};
    static const int dc[4] = {0, 0, -1, 1};
    int r = row(s) + dr[a];
    int c = col(s) + dc[a];
    if (r < 0 || r >= kSize || c < 0 || c >= kSize || is_wall(r, c)) return s;
    return cell(r, c);
  }

  static std::vector<double> features(int s) {
    int r = row(s), c = col(s);
    int room = (r <= 4 ? 0 : 2) + (c <= 4 ? 0 : 1);
    std::vector<double> f(6, 0.0);
    f[0] = static_cast<double>(c) / (kSize - 1);
    f[1] = static_cast<double>(r) / (kSize - 1);
    f[2 + room] = 1.0;
    return f;
  }

  std::vector<double> reset(Rng&) override {
    pos_ = start_;
    steps_ = 0;
    return features(pos_);
  }

  StepResult step(const std::vector<double>& action, Rng&) override {
    int a = static_cast<int>(action.at(0));
    if (a < 0 || a >= 4) throw ArgumentError("fourrooms: invalid action index");
    pos_ = next_cell(pos_, a);
    ++steps_;
    StepResult res;
    res.reward = -0.01;
    if (pos_ == goal_) {
      res.reward += 1.0;
      res.done = true;
    }
    res.state = features(pos_);
    return res;
  }

  int goal() const { return goal_; }
  int start() const { return start_; }
  int position() const { return pos_; }

 private:
  int task_;
  int goal_, start_;
  int pos_ = 0;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// PointMaze: 2-d point mass with Euler dynamics inside an axis-aligned maze.
// ---------------------------------------------------------------------------

struct WallRect {
  double x0, x1, y0, y1;
  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

struct PointTask {
  std::vector<WallRect> walls;
  std::vector<double> start;               // (x, y)
  std::vector<double> goal;                // (x, y)
  std::vector<std::vector<double>> route;  // expert waypoints ending at goal
};

class PointMaze : public Env {
 public:
  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.95;
  static constexpr double kGoalRadius = 0.3;
  static constexpr double kBound = 10.0;
  static constexpr int kHorizon = 200;

  PointMaze(std::string env_id, PointTask task)
      : id_(std::move(env_id)), task_(std::move(task)) {}

  std::string id() const override { return id_; }
  int state_dim() const override { return 4; }  // (x, y, vx, vy)
  int action_dim() const override { return 2; }
  bool discrete_actions() const override { return false; }
  int horizon() const override { return kHorizon; }

  std::vector<double> reset(Rng& rng) override {
    x_ = task_.start[0] + rng.uniform(-0.25, 0.25);
    y_ = task_.start[1] + rng.uniform(-0.25, 0.25);
    vx_ = vy_ = 0.0;
    return state();
  }

  StepResult step(const std::vector<double>& action, Rng&) override {
    if (action.size() != 2) throw ArgumentError("pointmaze: action must be 2-d");
    double ax = std::clamp(action[0], -1.0, 1.0);
    double ay = std::clamp(action[1], -1.0, 1.0);
    vx_ = kDamping * vx_ + ax * kDt;
    vy_ = kDamping * vy_ + ay * kDt;
    // advance per axis; a blocked axis zeroes its velocity component
    double nx = x_ + vx_ * kDt;
    if (nx < 0.0 || nx > kBound || blocked(nx, y_)) {
      nx = x_;
      vx_ = 0.0;
    }
    double ny = y_ + vy_ * kDt;
    if (ny < 0.0 || ny > kBound || blocked(nx, ny)) {
      ny = y_;
      vy_ = 0.0;
    }
    x_ = nx;
    y_ = ny;
    StepResult res;
    double d = dist_to_goal();
    res.reward = -0.01 * d;
    if (d <= kGoalRadius) {
      res.reward += 10.0;
      res.done = true;
    }
    res.state = state();
    return res;
  }

  double dist_to_goal() const {
    double dx = x_ - task_.goal[0], dy = y_ - task_.goal[1];
    return std::sqrt(dx * dx + dy * dy);
  }

  std::vector<double> state() const { return {x_, y_, vx_, vy_}; }
  const PointTask& task() const { return task_; }

 private:
  bool blocked(double x, double y) const {
    for (const auto& w : task_.walls)
      if (w.contains(x, y)) return true;
    return false;
  }

  std::string id_;
  PointTask task_;
  double x_ = 0, y_ = 0, vx_ = 0, vy_ = 0;
};

inline PointTask point_room_task(int task) {
  PointTask t;
  t.walls = {{0.0, 6.0, 4.9, 5.1}};
  t.start = {5.0, 1.0};
  if (task == 1) {
    t.goal = {1.5, 8.5};
    t.route = {{7.0, 2.0}, {7.0, 7.5}, {1.5, 8.5}};
  } else {
    t.goal = {8.5, 8.5};
    t.route = {{7.0, 2.0}, {7.0, 7.5}, {8.5, 8.5}};
  }
  return t;
}

inline PointTask point_corridor_task(int task) {
  PointTask t;
  t.walls = {{2.0, 10.0, 3.4, 3.6}, {0.0, 8.0, 6.4, 6.6}};
  t.start = {1.0, 1.0};
  if (task == 1) {
    t.goal = {9.0, 9.0};
    t.route = {{1.0, 5.0}, {9.0, 5.0}, {9.0, 9.0}};
  } else {
    t.goal = {9.0, 1.0};
    t.route = {{9.0, 1.0}};
  }
  return t;
}

// ---------------------------------------------------------------------------
// EnumerableMdp: tiny fully tabulated MDP for the exact oracles. States are
// presented to networks as one-hot features.
// ---------------------------------------------------------------------------

class EnumerableMdp : public Env {
 public:
  EnumerableMdp(std::string name, int num_states, int num_actions, int horizon,
                std::vector<double> initial, std::vector<double> transitions)
      : name_(std::move(name)),
        s_(num_states),
        a_(num_actions),
        horizon_(horizon),
        mu_(std::move(initial)),
        p_(std::move(transitions)) {
    if (static_cast<int>(mu_.size()) != s_)
      throw DimensionError("enumerable mdp: initial distribution size");
    if (static_cast<int>(p_.size()) != s_ * a_ * s_)
      throw DimensionError("enumerable mdp: transition table size");
    validate_rows();
  }

  std::string id() const override { return "enum-" + name_; }
  int state_dim() const override { return s_; }
  int action_dim() const override { return a_; }
  bool discrete_actions() const override { return true; }
  int horizon() const override { return horizon_; }

  int num_states() const { return s_; }
  int num_actions() const { return a_; }
  double initial(int s) const { return mu_[s]; }
  double transition(int s, int a, int s2) const {
    return p_[(static_cast<size_t>(s) * a_ + a) * s_ + s2];
  }

  std::vector<double> features(int s) const {
    std::vector<double> f(s_, 0.0);
    f[s] = 1.0;
    return f;
  }

  std::vector<double> reset(Rng& rng) override {
    cur_ = rng.categorical(mu_);
    return features(cur_);
  }

  StepResult step(const std::vector<double>& action, Rng& rng) override {
    int a = static_cast<int>(action.at(0));
    if (a < 0 || a >= a_) throw ArgumentError("enumerable mdp: invalid action");
    std::vector<double> row(s_);
    for (int s2 = 0; s2 < s_; ++s2) row[s2] = transition(cur_, a, s2);
    cur_ = rng.categorical(row);
    StepResult res;
    res.state = features(cur_);
    res.reward = 0.0;
    res.done = false;
    return res;
  }

  int current_state() const { return cur_; }

  static EnumerableMdp random(int num_states, int num_actions, int horizon,
                              Rng& rng, const std::string& name = "random") {
    std::vector<double> mu(num_states);
    double tot = 0.0;
    for (double& v : mu) {
      v = 0.1 + rng.uniform();
      tot += v;
    }
    for (double& v : mu) v /= tot;
    std::vector<double> p(static_cast<size_t>(num_states) * num_actions *
                          num_states);
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) {
        double rt = 0.0;
        for (int s2 = 0; s2 < num_states; ++s2) {
          double v = 0.1 + rng.uniform();
          p[(static_cast<size_t>(s) * num_actions + a) * num_states + s2] = v;
          rt += v;
        }
        for (int s2 = 0; s2 < num_states; ++s2)
          p[(static_cast<size_t>(s) * num_actions + a) * num_states + s2] /= rt;
      }
    return EnumerableMdp(name, num_states, num_actions, horizon, std::move(mu),
                         std::move(p));
  }

 private:
  void validate_rows() const {
    double m = 0.0;
    for (double v : mu_) m += v;
    if (std::abs(m - 1.0) > 1e-12)
      throw ArgumentError("enumerable mdp: initial distribution not normalized");
    for (int s = 0; s < s_; ++s)
      for (int a = 0; a < a_; ++a) {
        double r = 0.0;
        for (int s2 = 0; s2 < s_; ++s2) r += transition(s, a, s2);
        if (std::abs(r - 1.0) > 1e-12)
          throw ArgumentError("enumerable mdp: transition row not normalized");
      }
  }

  std::string name_;
  int s_, a_, horizon_;
  std::vector<double> mu_;
  std::vector<double> p_;
  int cur_ = 0;
};

// ---------------------------------------------------------------------------
// Env factory
// ---------------------------------------------------------------------------

inline std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "fourrooms-t1") return std::make_unique<FourRooms>(1);
  if (id == "fourrooms-t2") return std::make_unique<FourRooms>(2);
  if (id == "pointroom-t1")
    return std::make_unique<PointMaze>(id, point_room_task(1));
  if (id == "pointroom-t2")
    return std::make_unique<PointMaze>(id, point_room_task(2));
  if (id == "pointcorridor-t1")
    return std::make_unique<PointMaze>(id, point_corridor_task(1));
  if (id == "pointcorridor-t2")
    return std::make_unique<PointMaze>(id, point_corridor_task(2));
  if (id == "enum-chain2") {
    // two states, two actions; action 0 tends to stay, action 1 tends to move
    std::vector<double> mu = {1.0, 0.0};
    std::vector<double> p = {0.9, 0.1, 0.2, 0.8,   // from state 0: a0, a1
                             0.1, 0.9, 0.8, 0.2};  // from state 1: a0, a1
    return std::make_unique<EnumerableMdp>("chain2", 2, 2, 2, mu, p);
  }
  throw ArgumentError("unknown environment id: " + id);
}

// ---------------------------------------------------------------------------
// Trajectories and demonstration sets
// ---------------------------------------------------------------------------

struct Trajectory {
  std::vector<std::vector<double>> states;   // length L+1
  std::vector<std::vector<double>> actions;  // length L
  std::vector<int> options;                  // length L+1 when annotated
  bool has_options = false;
  std::vector<double> env_rewards;           // length L
  bool terminal = false;                     // reached a terminal state

  int length() const { return static_cast<int>(actions.size()); }
  double env_return() const {
    double r = 0.0;
    for (double v : env_rewards) r += v;
    return r;
  }
};

struct DemoHeader {
  std::string env;
  int state_dim = 0;
  int action_dim = 0;
  bool discrete_actions = true;
  int horizon = 0;
  double expert_return = 0.0;
};

struct DemoSet {
  DemoHeader header;
  std::vector<Trajectory> trajectories;

  bool annotated() const {
    if (trajectories.empty()) return false;
    for (const auto& t : trajectories)
      if (!t.has_options) return false;
    return true;
  }
};

inline void validate_trajectory(const Trajectory& t, int line_no) {
  if (t.states.size() != t.actions.size() + 1)
    throw ParseError("line " + std::to_string(line_no) +
                     ": states/actions length mismatch");
  if (t.has_options && t.options.size() != t.states.size())
    throw ParseError("line " + std::to_string(line_no) +
                     ": options length mismatch");
  for (size_t i = 1; i < t.states.size(); ++i)
    if (t.states[i].size() != t.states[0].size())
      throw ParseError("line " + std::to_string(line_no) +
                       ": inconsistent state dimension");
}

inline void write_demos(const DemoSet& demos, const std::string& path) {
  nlohmann::ordered_json header = {
      {"type", "hairl-demos"},
      {"version", 1},
      {"env", demos.header.env},
      {"state_dim", demos.header.state_dim},
      {"action_dim", demos.header.action_dim},
      {"discrete_actions", demos.header.discrete_actions},
      {"horizon", demos.header.horizon},
      {"expert_return", demos.header.expert_return}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << header.dump() << "\n";
  for (const auto& t : demos.trajectories) {
    nlohmann::ordered_json rec = {{"states", t.states},
                                  {"actions", t.actions},
                                  {"terminal", t.terminal},
                                  {"env_rewards", t.env_rewards}};
    if (t.has_options) rec["options"] = t.options;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline DemoSet read_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for read: " + path);
  std::string line;
  int line_no = 0;
  DemoSet demos;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1) {
      if (j.value("type", "") != "hairl-demos")
        throw ParseError("line 1: missing demo header");
      demos.header.env = j.at("env").get<std::string>();
      demos.header.state_dim = j.at("state_dim").get<int>();
      demos.header.action_dim = j.at("action_dim").get<int>();
      demos.header.discrete_actions = j.at("discrete_actions").get<bool>();
      demos.header.horizon = j.at("horizon").get<int>();
      demos.header.expert_return = j.at("expert_return").get<double>();
      continue;
    }
    Trajectory t;
    try {
      t.states = j.at("states").get<std::vector<std::vector<double>>>();
      t.actions = j.at("actions").get<std::vector<std::vector<double>>>();
      t.terminal = j.value("terminal", false);
      if (j.contains("env_rewards"))
        t.env_rewards = j.at("env_rewards").get<std::vector<double>>();
      if (j.contains("options")) {
        t.options = j.at("options").get<std::vector<int>>();
        t.has_options = true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    validate_trajectory(t, line_no);
    for (const auto& s : t.states)
      if (static_cast<int>(s.size()) != demos.header.state_dim)
        throw ParseError("line " + std::to_string(line_no) +
                         ": state dimension does not match header");
    demos.trajectories.push_back(std::move(t));
  }
  return demos;
}

}  // namespace hairl
