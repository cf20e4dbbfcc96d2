#pragma once

// Maximum-clearance Voronoi diagram over disjoint convex planar SQ obstacles,
// its cell graph, and least-cost path search on that graph.

#include <iosfwd>
#include <vector>

#include "wbam/sq_geometry.hpp"

namespace wbam {

/// Axis-aligned world rectangle.
struct Box2 {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();

  double area() const { return (hi - lo).prod(); }
};

/// Line n.p = c. The normal points from obstacle i towards obstacle j.
struct Hyperplane2 {
  Vec2 normal = Vec2::UnitX();
  double offset = 0.0;
  int i = 0;
  int j = 1;
  /// Closest proxy points the line bisects.
  Vec2 proxy_i = Vec2::Zero();
  Vec2 proxy_j = Vec2::Zero();

  double signed_distance(const Vec2& p) const { return normal.dot(p) - offset; }
};

/// Where a polygon edge came from: a bisector or one side of the world box.
struct EdgeSource {
  enum class Kind { kBox, kBisector };
  Kind kind = Kind::kBox;
  /// Hyperplane index for bisectors, box side (0 bottom, 1 right, 2 top, 3 left) otherwise.
  int index = 0;
};

struct VoronoiCell {
  int obstacle = 0;
  /// Counter-clockwise vertices.
  std::vector<Vec2> vertices;
  /// sources[k] generated the edge from vertices[k] to vertices[k + 1].
  std::vector<EdgeSource> sources;

  double area() const;
};

struct VoronoiDiagram {
  Box2 box;
  std::vector<Hyperplane2> hyperplanes;
  std::vector<VoronoiCell> cells;
};

struct GraphEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
  /// Bisector normal, or the inward box normal for boundary edges.
  Vec2 normal = Vec2::UnitX();
  /// Generating obstacles; -1 for box edges.
  int obstacle_i = -1;
  int obstacle_j = -1;
};

struct ClearanceGraph {
  std::vector<Vec2> nodes;
  std::vector<GraphEdge> edges;
};

struct PathEdge {
  Vec2 from = Vec2::Zero();
  Vec2 to = Vec2::Zero();
  Vec2 normal = Vec2::UnitX();
  /// atan2 of the edge normal.
  double normal_angle = 0.0;
  double length = 0.0;
};

struct SolutionPath {
  bool found = false;
  double cost = 0.0;
  std::vector<Vec2> nodes;
  std::vector<PathEdge> edges;
};

/// Perpendicular bisector of the closest proxy pair. Throws DomainError when
/// the shapes touch or overlap; `i` and `j` only label the message and result.
Hyperplane2 bisector(const Superquadric2& sq_i, const Superquadric2& sq_j, int i = 0, int j = 1);

/// Cells of the world box, one per obstacle, clipped by every bisector.
VoronoiDiagram build_cells(const std::vector<Superquadric2>& obstacles, const Box2& box);

/// Deduplicated cell vertices (merge radius 1e-7) joined by cell edges.
ClearanceGraph build_graph(const VoronoiDiagram& diagram);

/// Attaches start and goal to the nearest graph edges and runs a uniform-cost
/// search. Returns found = false when they lie in different components.
SolutionPath solve_path(const ClearanceGraph& graph, const Vec2& start, const Vec2& goal);

void write_diagram(std::ostream& os, const VoronoiDiagram& diagram, const ClearanceGraph& graph,
                   const SolutionPath& path);

}  // namespace wbam
