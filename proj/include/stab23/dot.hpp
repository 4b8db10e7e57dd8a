// Graphviz dump of a base or active tree. Nodes are named s<segment>_<slot>.
#pragma once

#include <sstream>
#include <string>
#include <string_view>

#include "stab23/semantics.hpp"

namespace stab23::semantics {

inline std::string dot_name(Link l) { return "s" + std::to_string(l.segment) + "_" + std::to_string(l.slot); }

inline std::string to_dot(const Arena& a, const Tree& t, std::string_view graph_name = "tree") {
  std::ostringstream out;
  out << "digraph " << graph_name << " {\n";
  out << "  node [shape=record, fontname=\"monospace\"];\n";
  for (const auto& tn : t.nodes) {
    if (!tn.present) continue;
    const Node& n = a.node(tn.link);
    out << "  " << dot_name(tn.link) << " [label=\"" << dot_name(tn.link);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      out << '|';
      if (!tn.live[s])
        out << "-";
      else if (tn.segment == 1)
        out << n.slots[s].low;
      else
        out << '(' << n.slots[s].low << ',' << n.slots[s].high << ')';
    }
    out << "\"];\n";
  }
  for (const auto& tn : t.nodes) {
    if (!tn.present || tn.segment == 1) continue;
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      if (!tn.live[s] || tn.child[s] < 0) continue;
      const auto& c = t.nodes[static_cast<std::size_t>(tn.child[s])];
      if (c.present) out << "  " << dot_name(tn.link) << " -> " << dot_name(c.link) << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace stab23::semantics
