#include "wbam/voronoi.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <queue>
#include <string>

#include "wbam/io.hpp"

namespace wbam {
namespace {

constexpr double kMergeRadius = 1e-7;
constexpr double kClipTol = 1e-12;

struct Polygon {
  std::vector<Vec2> v;
  std::vector<EdgeSource> src;
};

// Drops consecutive duplicates; the surviving vertex keeps the label of the
// edge that leaves it.
void remove_duplicates(Polygon& poly) {
  bool changed = true;
  while (changed && poly.v.size() > 1) {
    changed = false;
    for (std::size_t k = 0; k < poly.v.size(); ++k) {
      const std::size_t next = (k + 1) % poly.v.size();
      if ((poly.v[k] - poly.v[next]).norm() < kClipTol * 10.0) {
        poly.v.erase(poly.v.begin() + static_cast<long>(k));
        poly.src.erase(poly.src.begin() + static_cast<long>(k));
        changed = true;
        break;
      }
    }
  }
}

// Keeps the part with n.p - c <= 0.
Polygon clip(const Polygon& in, const Vec2& n, double c, EdgeSource label) {
  Polygon out;
  const std::size_t m = in.v.size();
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2& p = in.v[k];
    const Vec2& q = in.v[(k + 1) % m];
    const double sp = n.dot(p) - c, sq = n.dot(q) - c;
    const bool p_in = sp <= kClipTol, q_in = sq <= kClipTol;
    if (p_in) {
      out.v.push_back(p);
      out.src.push_back(in.src[k]);
      if (!q_in) {
        out.v.push_back(p + sp / (sp - sq) * (q - p));
        out.src.push_back(label);
      }
    } else if (q_in) {
      out.v.push_back(p + sp / (sp - sq) * (q - p));
      out.src.push_back(in.src[k]);
    }
  }
  remove_duplicates(out);
  if (out.v.size() < 3) return {};
  return out;
}

Vec2 box_inward_normal(int side) {
  switch (side) {
    case 0: return Vec2(0, 1);
    case 1: return Vec2(-1, 0);
    case 2: return Vec2(0, -1);
    default: return Vec2(1, 0);
  }
}

double segment_param(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return 0.0;
  return std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
}

}  // namespace

double VoronoiCell::area() const {
  double a = 0.0;
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const Vec2& p = vertices[k];
    const Vec2& q = vertices[(k + 1) % vertices.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Hyperplane2 bisector(const Superquadric2& sq_i, const Superquadric2& sq_j, int i, int j) {
  if (i == j) throw DomainError("bisector: obstacle indices must differ");
  const ClosestPair2 cp = closest_pair(sq_i, sq_j);
  if (!(cp.gap > 0.0)) {
    throw DomainError("obstacles " + std::to_string(i) + " and " + std::to_string(j) +
                      " overlap or touch");
  }
  Hyperplane2 h;
  h.i = i;
  h.j = j;
  h.proxy_i = cp.point_i;
  h.proxy_j = cp.point_j;
  h.normal = (cp.point_j - cp.point_i).normalized();
  h.offset = h.normal.dot(0.5 * (cp.point_i + cp.point_j));
  return h;
}

VoronoiDiagram build_cells(const std::vector<Superquadric2>& obstacles, const Box2& box) {
  if (obstacles.empty()) throw DomainError("voronoi: at least one obstacle is required");
  if (!(box.hi.x() > box.lo.x() && box.hi.y() > box.lo.y())) {
    throw DomainError("voronoi: world box is empty");
  }
  const int n = static_cast<int>(obstacles.size());
  for (int i = 0; i < n; ++i) {
    const double xmax = support_point(obstacles[i], Vec2(1, 0)).x();
    const double xmin = support_point(obstacles[i], Vec2(-1, 0)).x();
    const double ymax = support_point(obstacles[i], Vec2(0, 1)).y();
    const double ymin = support_point(obstacles[i], Vec2(0, -1)).y();
    if (xmin <= box.lo.x() || xmax >= box.hi.x() || ymin <= box.lo.y() || ymax >= box.hi.y()) {
      throw DomainError("obstacle " + std::to_string(i) + " is not inside the world box");
    }
  }

  VoronoiDiagram d;
  d.box = box;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) d.hyperplanes.push_back(bisector(obstacles[i], obstacles[j], i, j));
  }

  Polygon start;
  start.v = {box.lo, Vec2(box.hi.x(), box.lo.y()), box.hi, Vec2(box.lo.x(), box.hi.y())};
  for (int side = 0; side < 4; ++side) start.src.push_back({EdgeSource::Kind::kBox, side});

  for (int i = 0; i < n; ++i) {
    Polygon poly = start;
    for (std::size_t h = 0; h < d.hyperplanes.size() && !poly.v.empty(); ++h) {
      const Hyperplane2& hp = d.hyperplanes[h];
      const EdgeSource label{EdgeSource::Kind::kBisector, static_cast<int>(h)};
      if (hp.i == i) {
        poly = clip(poly, hp.normal, hp.offset, label);
      } else if (hp.j == i) {
        poly = clip(poly, -hp.normal, -hp.offset, label);
      }
    }
    if (poly.v.empty()) {
      throw RuntimeFailure("voronoi: cell of obstacle " + std::to_string(i) + " is empty");
    }
    d.cells.push_back({i, std::move(poly.v), std::move(poly.src)});
  }
  return d;
}

ClearanceGraph build_graph(const VoronoiDiagram& diagram) {
  ClearanceGraph g;
  auto node_of = [&](const Vec2& p) {
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      if ((g.nodes[k] - p).norm() <= kMergeRadius) return static_cast<int>(k);
    }
    g.nodes.push_back(p);
    return static_cast<int>(g.nodes.size() - 1);
  };

  struct Raw {
    int a, b;
    EdgeSource src;
  };
  std::vector<Raw> raw;
  for (const VoronoiCell& cell : diagram.cells) {
    std::vector<int> ids;
    for (const Vec2& v : cell.vertices) ids.push_back(node_of(v));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      raw.push_back({ids[k], ids[(k + 1) % ids.size()], cell.sources[k]});
    }
  }

  std::vector<std::pair<int, int>> seen;
  for (const Raw& r : raw) {
    if (r.a == r.b) continue;
    const Vec2 pa = g.nodes[r.a], pb = g.nodes[r.b];
    // Nodes lying strictly inside the segment split it.
    std::vector<std::pair<double, int>> cuts;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) {
      const int ki = static_cast<int>(k);
      if (ki == r.a || ki == r.b) continue;
      const double t = segment_param(pa, pb, g.nodes[k]);
      if (t <= 0.0 || t >= 1.0) continue;
      if ((pa + t * (pb - pa) - g.nodes[k]).norm() <= kMergeRadius) cuts.push_back({t, ki});
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> chain{r.a};
    for (const auto& c : cuts) chain.push_back(c.second);
    chain.push_back(r.b);

    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      const int a = chain[k], b = chain[k + 1];
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      if (a == b || std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      const double w = (g.nodes[a] - g.nodes[b]).norm();
      if (w <= kMergeRadius) continue;
      seen.push_back(key);
      GraphEdge e;
      e.a = key.first;
      e.b = key.second;
      e.weight = w;
      if (r.src.kind == EdgeSource::Kind::kBox) {
        e.normal = box_inward_normal(r.src.index);
      } else {
        const Hyperplane2& hp = diagram.hyperplanes[r.src.index];
        e.normal = hp.normal;
        e.obstacle_i = hp.i;
        e.obstacle_j = hp.j;
      }
      g.edges.push_back(e);
    }
  }
  return g;
}

SolutionPath solve_path(const ClearanceGraph& graph, const Vec2& start, const Vec2& goal) {
  if (graph.nodes.empty() || graph.edges.empty()) throw DomainError("solve_path: graph is empty");
  if (!start.allFinite() || !goal.allFinite()) throw DomainError("solve_path: non-finite endpoint");
  ClearanceGraph g = graph;

  // Projects p onto the nearest edge, splitting it if needed, and hangs p off
  // the projection with an edge that inherits the host edge's normal.
  auto attach = [&g](const Vec2& p) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    Vec2 best_q = Vec2::Zero();
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      const Vec2& a = g.nodes[g.edges[k].a];
      const Vec2& b = g.nodes[g.edges[k].b];
      const Vec2 q = a + segment_param(a, b, p) * (b - a);
      const double d = (p - q).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
        best_q = q;
      }
    }
    const GraphEdge host = g.edges[best];
    int on_graph;
    if ((best_q - g.nodes[host.a]).norm() <= kMergeRadius) {
      on_graph = host.a;
    } else if ((best_q - g.nodes[host.b]).norm() <= kMergeRadius) {
      on_graph = host.b;
    } else {
      g.nodes.push_back(best_q);
      on_graph = static_cast<int>(g.nodes.size() - 1);
      GraphEdge tail = host;
      g.edges[best].b = on_graph;
      g.edges[best].weight = (g.nodes[host.a] - best_q).norm();
      tail.a = on_graph;
      tail.weight = (g.nodes[host.b] - best_q).norm();
      g.edges.push_back(tail);
    }
    if (best_d <= kMergeRadius) return on_graph;
    g.nodes.push_back(p);
    const int id = static_cast<int>(g.nodes.size() - 1);
    GraphEdge link = host;
    link.a = on_graph;
    link.b = id;
    link.weight = best_d;
    g.edges.push_back(link);
    return id;
  };
  const int s = attach(start);
  const int t = attach(goal);

  const std::size_t n = g.nodes.size();
  std::vector<std::vector<int>> adj(n);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    adj[g.edges[k].a].push_back(static_cast<int>(k));
    adj[g.edges[k].b].push_back(static_cast<int>(k));
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<int> pred(n, -1), pred_edge(n, -1);
  std::vector<bool> done(n, false);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
  dist[s] = 0.0;
  open.push({0.0, s});
  while (!open.empty()) {
    const auto [du, u] = open.top();
    open.pop();
    if (done[u]) continue;
    done[u] = true;
    if (u == t) break;
    for (int k : adj[u]) {
      const GraphEdge& e = g.edges[k];
      const int w = e.a == u ? e.b : e.a;
      if (done[w]) continue;
      const double nd = du + e.weight;
      if (nd < dist[w] || (nd == dist[w] && u < pred[w])) {
        dist[w] = nd;
        pred[w] = u;
        pred_edge[w] = k;
        open.push({nd, w});
      }
    }
  }

  SolutionPath path;
  if (!done[t]) return path;
  path.found = true;
  path.cost = dist[t];
  std::vector<int> order;
  for (int v = t; v != -1; v = pred[v]) order.push_back(v);
  std::reverse(order.begin(), order.end());
  for (int v : order) path.nodes.push_back(g.nodes[v]);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const GraphEdge& e = g.edges[pred_edge[order[k]]];
    PathEdge pe;
    pe.from = g.nodes[order[k - 1]];
    pe.to = g.nodes[order[k]];
    pe.normal = e.normal;
    pe.normal_angle = std::atan2(e.normal.y(), e.normal.x());
    pe.length = e.weight;
    path.edges.push_back(pe);
  }
  return path;
}

void write_diagram(std::ostream& os, const VoronoiDiagram& d, const ClearanceGraph& graph,
                   const SolutionPath& path) {
  os << "box " << fmt(d.box.lo.x()) << ' ' << fmt(d.box.lo.y()) << ' ' << fmt(d.box.hi.x()) << ' '
     << fmt(d.box.hi.y()) << '\n';
  for (std::size_t k = 0; k < d.hyperplanes.size(); ++k) {
    const Hyperplane2& h = d.hyperplanes[k];
    os << "hyperplane " << k << ' ' << h.i << ' ' << h.j << ' ' << fmt(h.normal.x()) << ' '
       << fmt(h.normal.y()) << ' ' << fmt(h.offset) << '\n';
  }
  for (const VoronoiCell& c : d.cells) {
    os << "cell " << c.obstacle << ' ' << c.vertices.size() << '\n';
    for (const Vec2& v : c.vertices) os << "  " << fmt(v.x()) << ' ' << fmt(v.y()) << '\n';
  }
  for (std::size_t k = 0; k < graph.nodes.size(); ++k) {
    os << "node " << k << ' ' << fmt(graph.nodes[k].x()) << ' ' << fmt(graph.nodes[k].y()) << '\n';
  }
  for (const GraphEdge& e : graph.edges) {
    os << "edge " << e.a << ' ' << e.b << ' ' << fmt(e.weight) << ' ' << fmt(e.normal.x()) << ' '
       << fmt(e.normal.y()) << ' ' << e.obstacle_i << ' ' << e.obstacle_j << '\n';
  }
  os << "path " << (path.found ? 1 : 0) << ' ' << fmt(path.cost) << ' ' << path.nodes.size() << '\n';
  for (const Vec2& v : path.nodes) os << "  " << fmt(v.x()) << ' ' << fmt(v.y()) << '\n';
}

}  // namespace wbam
