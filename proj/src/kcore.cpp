#include <algorithm>

#include "polnet/hetgraph.hpp"

namespace polnet {

// Bucket-queue peeling (Batagelj & Zaversnik) over the total degree. Parallel
// edges of different kinds each contribute one unit of degree.
std::vector<std::size_t> core_numbers(const HeteroGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::size_t> deg(n);
  std::size_t max_deg = 0;
  for (NodeId v = 0; v < n; ++v) {
    deg[v] = g.total_degree(v);
    max_deg = std::max(max_deg, deg[v]);
  }

  std::vector<std::size_t> bin(max_deg + 1, 0);
  for (auto d : deg) ++bin[d];
  std::size_t start = 0;
  for (auto& b : bin) {
    const std::size_t count = b;
    b = start;
    start += count;
  }
  std::vector<NodeId> order(n);
  std::vector<std::size_t> pos(n);
  for (NodeId v = 0; v < n; ++v) {
    pos[v] = bin[deg[v]]++;
    order[pos[v]] = v;
  }
  for (std::size_t d = max_deg; d > 0; --d) bin[d] = bin[d - 1];
  if (!bin.empty()) bin[0] = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const NodeId v = order[i];
    for (EdgeKind kind : kAllEdgeKinds) {
      for (NodeId u : g.neighbors(v, kind)) {
        if (deg[u] <= deg[v]) continue;
        const std::size_t du = deg[u];
        const std::size_t pu = pos[u];
        const std::size_t pw = bin[du];
        const NodeId w = order[pw];
        if (u != w) {
          pos[u] = pw;
          order[pu] = w;
          pos[w] = pu;
          order[pw] = u;
        }
        ++bin[du];
        --deg[u];
      }
    }
  }
  return deg;
}

HeteroGraph k_core(const HeteroGraph& g, std::size_t k) {
  const auto core = core_numbers(g);
  std::vector<bool> keep(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) keep[v] = core[v] >= k;
  return induced_subgraph(g, keep);
}

}  // namespace polnet
