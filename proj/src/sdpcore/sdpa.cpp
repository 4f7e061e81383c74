#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "stochsafe/sdp.hpp"

namespace stochsafe::sdp {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

using Key = std::tuple<int, int, int, int>;  // matno, block (1-based), i, j (1-based, i <= j)

}  // namespace

std::string SdpaManifest::to_json() const {
  nlohmann::json j;
  j["format"] = "sdpa-sparse";
  j["psd_dims"] = psd_dims;
  j["num_free"] = num_free;
  j["num_rows"] = num_rows;
  j["split_block"] = split_block;
  j["free_names"] = free_names;
  j["objective_sign"] = -1;
  return j.dump(2);
}

SdpaManifest SdpaManifest::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SdpaManifest m;
  m.psd_dims = j.at("psd_dims").get<std::vector<int>>();
  m.num_free = j.at("num_free").get<int>();
  m.num_rows = j.at("num_rows").get<int>();
  m.split_block = j.at("split_block").get<int>();
  if (j.contains("free_names")) m.free_names = j.at("free_names").get<std::vector<std::string>>();
  return m;
}

SdpaManifest export_sdpa(const BlockSdp& sdp, std::ostream& out, const std::vector<std::string>& free_names) {
  sdp.validate();
  SdpaManifest man;
  for (const auto& blk : sdp.blocks) man.psd_dims.push_back(blk.dim);
  man.num_free = sdp.num_free();
  man.num_rows = sdp.num_rows();
  man.free_names = free_names;
  const int nb = static_cast<int>(sdp.blocks.size());
  if (man.num_free > 0) man.split_block = nb;

  std::map<Key, double> entries;
  for (int bi = 0; bi < nb; ++bi) {
    const auto& blk = sdp.blocks[static_cast<std::size_t>(bi)];
    for (const auto& e : blk.objective) entries[{0, bi + 1, e.i + 1, e.j + 1}] -= e.value;
    for (const auto& c : blk.couplings)
      for (const auto& e : blk.atoms[static_cast<std::size_t>(c.atom)])
        entries[{c.row + 1, bi + 1, e.i + 1, e.j + 1}] += c.coef * e.value;
  }
  const int F = man.num_free;
  for (int v = 0; v < F; ++v) {
    const double cf = sdp.c_free[v];
    entries[{0, nb + 1, v + 1, v + 1}] -= cf;
    entries[{0, nb + 1, F + v + 1, F + v + 1}] += cf;
  }
  for (const auto& e : sdp.free_entries) {
    entries[{e.row + 1, nb + 1, e.var + 1, e.var + 1}] += e.coef;
    entries[{e.row + 1, nb + 1, F + e.var + 1, F + e.var + 1}] -= e.coef;
  }

  out << "\"stochsafe block SDP; F0 = -C, objective sign flipped\n";
  out << man.num_rows << "\n" << (nb + (F > 0 ? 1 : 0)) << "\n";
  for (int bi = 0; bi < nb; ++bi) out << (bi ? " " : "") << sdp.blocks[static_cast<std::size_t>(bi)].dim;
  if (F > 0) out << (nb ? " " : "") << -2 * F;
  out << "\n";
  for (int r = 0; r < man.num_rows; ++r) out << (r ? " " : "") << fmt(sdp.b[r]);
  out << "\n";
  for (const auto& [k, v] : entries) {
    if (v == 0.0) continue;
    out << std::get<0>(k) << " " << std::get<1>(k) << " " << std::get<2>(k) << " " << std::get<3>(k) << " " << fmt(v)
        << "\n";
  }
  return man;
}

BlockSdp import_sdpa(std::istream& in, const SdpaManifest* manifest) {
  std::vector<std::string> lines;
  std::vector<int> lineno;
  {
    std::string s;
    int n = 0;
    while (std::getline(in, s)) {
      ++n;
      const auto first = s.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      if (s[first] == '"' || s[first] == '*') continue;
      for (char& c : s)
        if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')') c = ' ';
      lines.push_back(s);
      lineno.push_back(n);
    }
  }
  std::size_t li = 0;
  auto next = [&](const char* what) -> std::istringstream {
    if (li >= lines.size()) throw SdpaParseError(std::string("missing ") + what, lineno.empty() ? 0 : lineno.back());
    return std::istringstream(lines[li++]);
  };
  int m = 0;
  int nb = 0;
  {
    auto ss = next("number of constraints");
    if (!(ss >> m) || m < 0) throw SdpaParseError("bad number of constraints", lineno[li - 1]);
  }
  {
    auto ss = next("number of blocks");
    if (!(ss >> nb) || nb <= 0) throw SdpaParseError("bad number of blocks", lineno[li - 1]);
  }
  std::vector<int> dims;
  {
    auto ss = next("block structure");
    int d;
    while (static_cast<int>(dims.size()) < nb && ss >> d) {
      if (d == 0) throw SdpaParseError("zero block size", lineno[li - 1]);
      dims.push_back(d);
    }
    if (static_cast<int>(dims.size()) != nb) throw SdpaParseError("block structure too short", lineno[li - 1]);
  }
  std::vector<double> c;
  {
    // The cost vector may span several lines.
    while (static_cast<int>(c.size()) < m) {
      auto ss = next("cost vector");
      std::string tok;
      while (static_cast<int>(c.size()) < m && ss >> tok) {
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
          throw SdpaParseError("malformed number '" + tok + "'", lineno[li - 1]);
        c.push_back(v);
      }
    }
  }

  int split = -1;
  int F = 0;
  if (manifest) {
    split = manifest->split_block;
    F = manifest->num_free;
    if (split >= 0 && (split >= nb || dims[static_cast<std::size_t>(split)] != -2 * F))
      throw SdpaParseError("manifest does not match block structure", 0);
    if (manifest->num_rows != m) throw SdpaParseError("manifest row count does not match", 0);
  }

  BlockSdp sdp;
  for (int r = 0; r < m; ++r) sdp.add_row(c[static_cast<std::size_t>(r)]);
  for (int v = 0; v < F; ++v) sdp.add_free(0.0);
  // Map (sdpa block, diag index) to our PSD block index.
  std::vector<int> base(static_cast<std::size_t>(nb), -1);
  for (int bi = 0; bi < nb; ++bi) {
    if (bi == split) continue;
    const int d = dims[static_cast<std::size_t>(bi)];
    if (d > 0) {
      base[static_cast<std::size_t>(bi)] = sdp.add_block(d);
    } else {
      base[static_cast<std::size_t>(bi)] = static_cast<int>(sdp.blocks.size());
      for (int k = 0; k < -d; ++k) sdp.add_block(1);
    }
  }

  std::map<std::pair<int, int>, SparseSym> mats;  // (row, our block) -> entries
  for (; li < lines.size(); ++li) {
    std::istringstream ss(lines[li]);
    int mat, blk, i, j;
    std::string tok;
    if (!(ss >> mat >> blk >> i >> j >> tok)) throw SdpaParseError("malformed entry", lineno[li]);
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      throw SdpaParseError("malformed number '" + tok + "'", lineno[li]);
    if (mat < 0 || mat > m) throw SdpaParseError("matrix index out of range", lineno[li]);
    if (blk < 1 || blk > nb) throw SdpaParseError("block index out of range", lineno[li]);
    const int b0 = blk - 1;
    const int d = dims[static_cast<std::size_t>(b0)];
    const int n = std::abs(d);
    if (i < 1 || j < 1 || i > n || j > n) throw SdpaParseError("entry index out of range", lineno[li]);
    if (d < 0 && i != j) throw SdpaParseError("off-diagonal entry in diagonal block", lineno[li]);
    if (i > j) std::swap(i, j);
    if (b0 == split) {
      // Only the x+ half carries information; x- mirrors it with opposite sign.
      if (i > F) continue;
      if (mat == 0) sdp.c_free[i - 1] += -v;
      else sdp.add_free_entry(mat - 1, i - 1, v);
      continue;
    }
    int target = base[static_cast<std::size_t>(b0)];
    int ii = i - 1;
    int jj = j - 1;
    if (d < 0) {
      target += i - 1;
      ii = jj = 0;
    }
    if (mat == 0) sdp.add_objective_entry(target, ii, jj, -v);
    else mats[{mat - 1, target}].push_back({ii, jj, v});
  }
  for (auto& [key, entries] : mats) {
    const int atom = sdp.add_atom(key.second, std::move(entries));
    sdp.couple(key.first, key.second, atom, 1.0);
  }
  return sdp;
}

}  // namespace stochsafe::sdp
