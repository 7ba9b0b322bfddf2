#include "dltta/plots.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "json.hpp"

#include "dltta/errors.hpp"
#include "dltta/telemetry_io.hpp"

namespace dltta {
namespace {

std::string python_list(const std::vector<std::filesystem::path>& paths) {
  std::string out = "[\n";
  for (const auto& p : paths) out += "    " + nlohmann::json(p.string()).dump() + ",\n";
  out += "]";
  return out;
}

void write_script(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw FormatError("plots: cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw FormatError("plots: write failed for " + path.string());
}

constexpr const char* kPrelude =
    "#!/usr/bin/env python3\n"
    "# Generated by `dltta emit-plots`; reads the referenced CSVs and writes a\n"
    "# PNG next to this script. Requires matplotlib.\n"
    "import csv\n"
    "import os.path as osp\n"
    "import matplotlib\n"
    "matplotlib.use(\"Agg\")\n"
    "import matplotlib.pyplot as plt\n"
    "\n";

const char* kLossBody = R"PY(
series = {}
for path in CSVS:
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            xs, ys = series.setdefault(row["method"], ([], []))
            xs.append(int(row["step"]))
            ys.append(float(row["tta_loss"]))

fig, ax = plt.subplots(figsize=(9, 4.5))
for method in sorted(series):
    xs, ys = series[method]
    ax.plot(xs, ys, label=method, linewidth=0.8)
ax.set_xlabel("step")
ax.set_ylabel("test-time loss")
ax.set_title("test-time loss per step")
ax.legend()
fig.tight_layout()
fig.savefig(osp.join(osp.dirname(osp.abspath(__file__)), "loss_curves.png"), dpi=150)
)PY";

const char* kLrBody = R"PY(
series = {}
for path in CSVS:
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            xs, lrs, ds = series.setdefault(row["method"], ([], [], []))
            xs.append(int(row["step"]))
            lrs.append(float(row["applied_lr"]))
            ds.append(float(row["discrepancy"]))

fig, (ax_lr, ax_d) = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
for method in sorted(series):
    xs, lrs, ds = series[method]
    ax_lr.plot(xs, lrs, label=method, linewidth=0.8)
    ax_d.plot(xs, ds, label=method, linewidth=0.8)
ax_lr.set_ylabel("applied learning rate")
ax_d.set_ylabel("bank discrepancy")
ax_d.set_xlabel("step")
ax_lr.legend()
fig.tight_layout()
fig.savefig(osp.join(osp.dirname(osp.abspath(__file__)), "lr_trace.png"), dpi=150)
)PY";

const char* kRetrievalBody = R"PY(
rows = []
for path in CSVS:
    with open(path, newline="") as fh:
        rows.extend(csv.DictReader(fh))
rows.sort(key=lambda r: int(r["d"]))

fig, ax = plt.subplots(figsize=(6, 4))
ax.plot([int(r["d"]) for r in rows], [100.0 * float(r["final_accuracy"]) for r in rows],
        marker="o")
ax.set_xlabel("retrieval size D")
ax.set_ylabel("final accuracy (%)")
ax.set_title("retrieval size sweep")
fig.tight_layout()
fig.savefig(osp.join(osp.dirname(osp.abspath(__file__)), "retrieval_sweep.png"), dpi=150)
)PY";

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& csvs,
                                              const std::filesystem::path& out_dir) {
  if (csvs.empty()) throw ConfigError("emit-plots: no input CSVs");
  std::filesystem::create_directories(out_dir);

  std::vector<std::filesystem::path> telemetry, retrieval;
  for (const auto& p : csvs) {
    const CsvTable table = read_csv(p);
    const bool looks_retrieval =
        std::find(table.header.begin(), table.header.end(), "d") != table.header.end();
    if (looks_retrieval) {
      table.column("d");
      table.column("final_accuracy");
      retrieval.push_back(p);
    } else {
      // Telemetry plots need these columns; column() names the missing one.
      table.column("step");
      table.column("method");
      table.column("tta_loss");
      table.column("applied_lr");
      table.column("discrepancy");
      telemetry.push_back(p);
    }
  }

  std::vector<std::filesystem::path> scripts;
  if (!telemetry.empty()) {
    const std::string csv_list = "CSVS = " + python_list(telemetry) + "\n";
    const auto loss_path = out_dir / "loss_curves.py";
    write_script(loss_path, std::string(kPrelude) + csv_list + kLossBody);
    scripts.push_back(loss_path);
    const auto lr_path = out_dir / "lr_trace.py";
    write_script(lr_path, std::string(kPrelude) + csv_list + kLrBody);
    scripts.push_back(lr_path);
  }
  if (!retrieval.empty()) {
    const std::string csv_list = "CSVS = " + python_list(retrieval) + "\n";
    const auto path = out_dir / "retrieval_sweep.py";
    write_script(path, std::string(kPrelude) + csv_list + kRetrievalBody);
    scripts.push_back(path);
  }
  return scripts;
}

}  // namespace dltta
