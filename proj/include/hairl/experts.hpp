// Expert policy generators for the desk-scale environments: an exact
// value-iteration policy for the gridworld and a scripted waypoint controller
// for the point mazes, plus demonstration dataset generation.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hairl/core.hpp"
#include "hairl/envs.hpp"

namespace hairl {

// ---------------------------------------------------------------------------
// FourRooms: exact shortest-path policy from value iteration
// ---------------------------------------------------------------------------

class FourRoomsExpert {
 public:
  explicit FourRoomsExpert(const FourRooms& env) : goal_(env.goal()) {
    int cells = FourRooms::kSize * FourRooms::kSize;
    dist_.assign(cells, kInf);
    dist_[goal_] = 0;
    // value iteration on unit step costs; converges to shortest path lengths
    bool changed = true;
    while (changed) {
      changed = false;
      for (int s = 0; s < cells; ++s) {
        if (FourRooms::is_wall(FourRooms::row(s), FourRooms::col(s))) continue;
        for (int a = 0; a < 4; ++a) {
          int s2 = FourRooms::next_cell(s, a);
          if (dist_[s2] == kInf) continue;
          int cand = 1 + dist_[s2];
          if (cand < dist_[s]) {
            dist_[s] = cand;
            changed = true;
          }
        }
      }
    }
  }

  int distance(int cell) const { return dist_[cell]; }

  // uniformly random among distance-decreasing actions
  int act(int cell, Rng& rng) const {
    std::vector<int> best;
    for (int a = 0; a < 4; ++a) {
      int s2 = FourRooms::next_cell(cell, a);
      if (s2 != cell && dist_[s2] == dist_[cell] - 1) best.push_back(a);
    }
    if (best.empty()) throw NumericError("fourrooms expert: goal unreachable");
    return best[rng.uniform_int(static_cast<int>(best.size()))];
  }

  // horizontal moves are option 0, vertical moves option 1
  static int direction_option(int action) { return action <= 1 ? 1 : 0; }

 private:
  static constexpr int kInf = 1 << 20;
  int goal_;
  std::vector<int> dist_;
};

// ---------------------------------------------------------------------------
// PointMaze: waypoint-following controller; options are segmented by the
// forward direction of each leg
// ---------------------------------------------------------------------------

class PointMazeExpert {
 public:
  explicit PointMazeExpert(const PointTask& task) : task_(task) {
    std::vector<double> prev = task.start;
    for (const auto& wp : task.route) {
      double dx = wp[0] - prev[0], dy = wp[1] - prev[1];
      leg_option_.push_back(std::abs(dx) >= std::abs(dy) ? 0 : 1);
      prev = wp;
    }
  }

  void reset() { leg_ = 0; }

  int current_option() const { return leg_option_[leg_]; }

  std::vector<double> act(const std::vector<double>& state) {
    double px = state[0], py = state[1], vx = state[2], vy = state[3];
    const auto& wp = task_.route[leg_];
    double dx = wp[0] - px, dy = wp[1] - py;
    double dist = std::sqrt(dx * dx + dy * dy);
    if (dist < 0.5 && leg_ + 1 < static_cast<int>(task_.route.size())) {
      ++leg_;
      return act(state);
    }
    double speed = std::min(2.0, 0.8 * dist + 0.2);
    double tvx = dist > 1e-9 ? dx / dist * speed : 0.0;
    double tvy = dist > 1e-9 ? dy / dist * speed : 0.0;
    double ax = (tvx - PointMaze::kDamping * vx) / PointMaze::kDt;
    double ay = (tvy - PointMaze::kDamping * vy) / PointMaze::kDt;
    return {std::clamp(ax, -1.0, 1.0), std::clamp(ay, -1.0, 1.0)};
  }

 private:
  PointTask task_;
  std::vector<int> leg_option_;
  int leg_ = 0;
};

// ---------------------------------------------------------------------------
// Demonstration generation
// ---------------------------------------------------------------------------

inline Trajectory expert_episode(Env& env, Rng& rng, bool annotate) {
  Trajectory traj;
  std::vector<double> state = env.reset(rng);
  traj.states.push_back(state);
  if (annotate) {
    traj.has_options = true;
    traj.options.push_back(0);
  }

  auto* rooms = dynamic_cast<FourRooms*>(&env);
  auto* maze = dynamic_cast<PointMaze*>(&env);
  std::unique_ptr<FourRoomsExpert> grid_expert;
  std::unique_ptr<PointMazeExpert> maze_expert;
  if (rooms) {
    grid_expert = std::make_unique<FourRoomsExpert>(*rooms);
  } else if (maze) {
    maze_expert = std::make_unique<PointMazeExpert>(maze->task());
    maze_expert->reset();
  } else {
    throw ArgumentError("no expert defined for environment " + env.id());
  }

  for (int t = 0; t < env.horizon(); ++t) {
    std::vector<double> action;
    int option = 0;
    if (rooms) {
      int a = grid_expert->act(rooms->position(), rng);
      option = FourRoomsExpert::direction_option(a);
      action = {static_cast<double>(a)};
    } else {
      action = maze_expert->act(state);
      option = maze_expert->current_option();
    }
    StepResult res = env.step(action, rng);
    traj.actions.push_back(action);
    traj.env_rewards.push_back(res.reward);
    traj.states.push_back(res.state);
    if (annotate) traj.options.push_back(option);
    state = res.state;
    if (res.done) {
      traj.terminal = true;
      break;
    }
  }
  return traj;
}

inline DemoSet generate_demos(Env& env, int episodes, uint64_t seed,
                              bool annotate) {
  if (episodes < 1) throw ArgumentError("generate_demos: episodes must be >= 1");
  DemoSet demos;
  demos.header.env = env.id();
  demos.header.state_dim = env.state_dim();
  demos.header.action_dim = env.action_dim();
  demos.header.discrete_actions = env.discrete_actions();
  demos.header.horizon = env.horizon();
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng = Rng(seed).spawn(static_cast<uint64_t>(e) + 17);
    Trajectory t = expert_episode(env, rng, annotate);
    total += t.env_return();
    demos.trajectories.push_back(std::move(t));
  }
  demos.header.expert_return = total / episodes;
  return demos;
}

}  // namespace hairl
