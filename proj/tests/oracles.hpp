#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "modelterm/engine.hpp"
#include "modelterm/eval.hpp"
#include "modelterm/surface.hpp"

namespace oracle {

// Concrete data for the comprehension oracle. N and M iterate as 0..n-1,
// S is a set of integers, P a set of pairs, w an integer array.
struct Data {
  std::int64_t N = 0;
  std::int64_t M = 0;
  std::vector<std::int64_t> S;
  std::vector<std::pair<std::int64_t, std::int64_t>> P;
  std::vector<std::int64_t> w;

  mt::Env env() const;
};

Data random_data(std::mt19937& rng);

// A scalar is a one-element vector; tuples have one entry per component.
using Item = std::vector<std::int64_t>;

// Evaluates a surface comprehension with plain nested loops.
std::vector<Item> run_comprehension(const mt::SurfaceComprehension& c, const Data& d);
std::int64_t run_expr(const mt::SExpr& e, const Data& d);

Item to_item(const mt::Value& v);
std::vector<Item> to_items(const mt::Value& seq);

// Random comprehension source text over N, M, S, P and w, with at most
// `max_gens` generators and `max_guards` guards.
std::string random_comprehension(std::mt19937& rng, int max_gens = 3, int max_guards = 2);

// Model text declaring the oracle's symbols with `objective` as objective.
std::string wrap_objective(const std::string& objective);

// Random e-graph with at most `max_classes` classes, and the brute-force
// optimum over all per-class node choices.
struct RandomGraph {
  mt::EGraph g;
  mt::CostModel cm;
  mt::ClassId root = 0;
  std::map<mt::NodeId, double> cost;  // own cost of every node
};

RandomGraph random_egraph(std::mt19937& rng, int max_classes = 6);
// Infinity when no finite tree exists.
double brute_force_min_cost(const RandomGraph& r);
// Recomputes the cost of an extracted tree from per-op and table costs.
double tree_cost(const RandomGraph& r, const mt::ExtractedTerm& t);

}  // namespace oracle
