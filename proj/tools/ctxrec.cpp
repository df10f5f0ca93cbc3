// Command-line front end: every subcommand is a thin wrapper over the
// library, writes a manifest beside each output, and routes all randomness
// through --seed so reruns are byte-identical.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctxrec/dataset.hpp"
#include "ctxrec/error.hpp"
#include "ctxrec/experiment.hpp"
#include "ctxrec/forest.hpp"
#include "ctxrec/ingest.hpp"
#include "ctxrec/kgraph.hpp"
#include "ctxrec/ontology.hpp"
#include "ctxrec/rng.hpp"
#include "ctxrec/sensors.hpp"
#include "ctxrec/synth.hpp"
#include "ctxrec/version.hpp"

namespace {

using ctxrec::Error;
using ordered_json = nlohmann::ordered_json;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error::io("cannot open '" + path + "' for reading");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error::io("cannot open '" + path + "' for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error::io("failed writing '" + path + "'");
    }
}

std::string text_digest(const std::string& bytes) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(ctxrec::fnv1a64(bytes)));
    return buffer;
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// The manifest is the replay record: resolved config, tool version, and the
// digest of what was written.
void write_manifest(const std::string& subcommand, const ordered_json& config,
                    const std::string& out_path, const std::string& out_bytes,
                    double runtime_seconds) {
    ordered_json manifest;
    manifest["tool"] = ctxrec::kToolName;
    manifest["version"] = ctxrec::kToolVersion;
    manifest["subcommand"] = subcommand;
    manifest["config"] = config;
    manifest["output"] = ordered_json{{"path", out_path}, {"digest", text_digest(out_bytes)}};
    manifest["runtime_seconds"] = runtime_seconds;
    spill(out_path + ".manifest.json", manifest.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::string current;
    for (char c : text) {
        if (c == ',') {
            if (!current.empty()) {
                items.push_back(current);
            }
            current.clear();
        } else {
            current += c;
        }
    }
    if (!current.empty()) {
        items.push_back(current);
    }
    return items;
}

std::vector<ctxrec::AspectId> parse_aspect_list(const std::string& text) {
    std::vector<ctxrec::AspectId> aspects;
    for (const std::string& item : split_list(text)) {
        aspects.push_back(ctxrec::require_aspect(item));
    }
    return aspects;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> values;
    for (const std::string& item : split_list(text)) {
        try {
            size_t used = 0;
            const int value = std::stoi(item, &used);
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
            values.push_back(value);
        } catch (const std::exception&) {
            throw Error::config(what + ": '" + item + "' is not an integer");
        }
    }
    if (values.empty()) {
        throw Error::config(what + ": empty list");
    }
    return values;
}

std::string joined_aspects(const std::vector<ctxrec::AspectId>& aspects) {
    if (aspects.empty()) {
        return "none";
    }
    std::string out;
    for (ctxrec::AspectId aspect : aspects) {
        if (!out.empty()) {
            out += ",";
        }
        out += ctxrec::to_string(aspect);
    }
    return out;
}

// Shared by train/experiment: dataset plus the label machinery for one
// target aspect and optional augmentation inputs.
struct Design {
    ctxrec::Dataset dataset;
    std::vector<ctxrec::AspectId> inputs;
    std::map<ctxrec::AspectId, std::vector<std::string>> vocabs;
    std::vector<std::string> target_vocab;
    std::vector<uint32_t> y;
};

Design load_design(const std::string& records_path, ctxrec::AspectId target,
                   const std::vector<ctxrec::AspectId>& inputs) {
    Design d;
    d.dataset = ctxrec::read_table_file(records_path);
    d.inputs = inputs;
    d.target_vocab = ctxrec::aspect_vocab(d.dataset, target);
    d.vocabs[target] = d.target_vocab;
    for (ctxrec::AspectId aspect : inputs) {
        d.vocabs[aspect] = ctxrec::aspect_vocab(d.dataset, aspect);
    }
    d.y.resize(d.dataset.records.size());
    for (size_t i = 0; i < d.dataset.records.size(); ++i) {
        const ctxrec::Record& r = d.dataset.records[i];
        const std::string& label = target == ctxrec::AspectId::We   ? r.we
                                   : target == ctxrec::AspectId::Wa ? r.wa
                                                                    : r.wo;
        const auto it =
            std::lower_bound(d.target_vocab.begin(), d.target_vocab.end(), label);
        d.y[i] = static_cast<uint32_t>(it - d.target_vocab.begin());
    }
    return d;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"personal context toolkit: ontologies, sensor ingestion, synthetic data, "
                 "random forests, and recognition experiments"};
    app.set_version_flag("--version",
                         std::string(ctxrec::kToolName) + " " + ctxrec::kToolVersion);
    app.require_subcommand(1);

    // ---- validate ----------------------------------------------------
    auto* validate = app.add_subcommand("validate", "Check an ontology (and optionally an "
                                                    "annotation table) for consistency");
    std::string v_ontology;
    std::string v_annotations;
    bool v_strict = false;
    validate->add_option("--ontology", v_ontology, "Ontology JSON file")->required();
    validate->add_option("--annotations", v_annotations,
                         "Annotation CSV to check against the ontology");
    validate->add_flag("--strict", v_strict, "Reject unknown keys in the ontology file");
    validate->callback([&] {
        const ctxrec::Ontology ontology = ctxrec::load_ontology_file(v_ontology, v_strict);
        std::cout << "ontology OK: " << ontology.label_count() << " labels, "
                  << ontology.time_rules.size() << " time rules, "
                  << ontology.geofences.size() << " geofences\n";
        if (!v_annotations.empty()) {
            const auto events = ctxrec::read_annotations_file(v_annotations, &ontology);
            std::set<std::string> users;
            for (const auto& event : events) {
                users.insert(event.user);
            }
            std::cout << "annotations OK: " << events.size() << " events from "
                      << users.size() << " users\n";
        }
    });

    // ---- ingest ------------------------------------------------------
    auto* ingest = app.add_subcommand(
        "ingest", "Turn a raw sensor log plus annotations into a fixed-width record table");
    std::string i_sensors;
    std::string i_annotations;
    std::string i_ontology;
    std::string i_recipe;
    std::string i_out;
    int64_t i_window_ms = ctxrec::kDefaultWindowMs;
    bool i_strict = false;
    ingest->add_option("--sensors", i_sensors, "Sensor log CSV")->required();
    ingest->add_option("--annotations", i_annotations, "Annotation CSV")->required();
    ingest->add_option("--ontology", i_ontology, "Validate annotation labels against this ontology");
    ingest->add_option("--recipe", i_recipe, "Feature recipe JSON (default: built-in recipe)");
    ingest->add_option("--out", i_out, "Output record table CSV")->required();
    ingest->add_option("--window-ms", i_window_ms, "Annotation window length in ms");
    ingest->add_flag("--strict", i_strict, "Abort on unknown sensors or bad readings");
    ingest->callback([&] {
        Stopwatch watch;
        const ctxrec::SensorCatalog& catalog = ctxrec::default_catalog();
        const ctxrec::FeatureRecipe recipe =
            i_recipe.empty() ? ctxrec::default_recipe()
                             : ctxrec::load_recipe_file(i_recipe, catalog);
        ctxrec::ParseStats parse_stats;
        const auto readings =
            ctxrec::parse_sensor_log_file(i_sensors, catalog, i_strict, &parse_stats);
        ctxrec::Ontology ontology;
        const bool have_ontology = !i_ontology.empty();
        if (have_ontology) {
            ontology = ctxrec::load_ontology_file(i_ontology);
        }
        const auto annotations = ctxrec::read_annotations_file(
            i_annotations, have_ontology ? &ontology : nullptr);
        ctxrec::WindowStats window_stats;
        const ctxrec::Dataset dataset = ctxrec::build_dataset(readings, annotations, catalog,
                                                              recipe, i_window_ms,
                                                              &window_stats);
        const std::string table = ctxrec::write_table(dataset);
        spill(i_out, table);

        std::cout << "ingested " << dataset.records.size() << " records ("
                  << dataset.width() << " features) from " << readings.size()
                  << " readings\n";
        std::cout << "skipped " << parse_stats.skipped << " readings, truncated "
                  << window_stats.truncated << " windows, dropped " << window_stats.dropped
                  << " unclaimed readings\n";
        std::cout << "wrote " << i_out << " (" << ctxrec::dataset_digest(dataset) << ")\n";

        ordered_json config{{"sensors", i_sensors},
                            {"annotations", i_annotations},
                            {"ontology", i_ontology},
                            {"recipe", i_recipe.empty() ? "builtin" : i_recipe},
                            {"window_ms", i_window_ms},
                            {"strict", i_strict}};
        write_manifest("ingest", config, i_out, table, watch.seconds());
    });

    // ---- generate ------------------------------------------------------
    auto* generate = app.add_subcommand(
        "generate", "Sample a synthetic labeled dataset with tunable aspect correlation");
    ctxrec::GeneratorParams g;
    std::string g_out;
    generate->add_option("--out", g_out, "Output record table CSV")->required();
    generate->add_option("--seed", g.seed, "Master seed");
    generate->add_option("--users", g.users, "Number of synthetic users");
    generate->add_option("--per-user", g.records_per_user, "Records per user");
    generate->add_option("--we-labels", g.we_labels, "WE vocabulary size");
    generate->add_option("--wa-labels", g.wa_labels, "WA vocabulary size");
    generate->add_option("--wo-labels", g.wo_labels, "WO vocabulary size");
    generate->add_option("--rho", g.rho, "Aspect correlation strength in [0,1]");
    generate->add_option("--width", g.feature_width, "Sensor feature width");
    generate->add_option("--noise", g.noise_scale, "Gaussian noise scale");
    generate->add_option("--prototype-scale", g.prototype_scale, "Prototype spread");
    generate->callback([&] {
        Stopwatch watch;
        const ctxrec::Dataset dataset = ctxrec::sample_dataset(g);
        const std::string table = ctxrec::write_table(dataset);
        spill(g_out, table);

        std::vector<std::string> we;
        std::vector<std::string> wa;
        std::vector<std::string> wo;
        for (const auto& record : dataset.records) {
            we.push_back(record.we);
            wa.push_back(record.wa);
            wo.push_back(record.wo);
        }
        std::cout << "generated " << g.users << " users x " << g.records_per_user
                  << " records, " << g.feature_width << " features, rho " << g.rho << "\n";
        std::printf("label coupling (nats): MI(WE;WA)=%.3f MI(WE;WO)=%.3f MI(WA;WO)=%.3f\n",
                    ctxrec::mutual_information(we, wa), ctxrec::mutual_information(we, wo),
                    ctxrec::mutual_information(wa, wo));
        std::cout << "wrote " << g_out << " (" << ctxrec::dataset_digest(dataset) << ")\n";

        ordered_json config{{"seed", g.seed},
                            {"users", g.users},
                            {"per_user", g.records_per_user},
                            {"we_labels", g.we_labels},
                            {"wa_labels", g.wa_labels},
                            {"wo_labels", g.wo_labels},
                            {"rho", g.rho},
                            {"width", g.feature_width},
                            {"noise", g.noise_scale},
                            {"prototype_scale", g.prototype_scale}};
        write_manifest("generate", config, g_out, table, watch.seconds());
    });

    // ---- train ---------------------------------------------------------
    auto* train = app.add_subcommand(
        "train", "Fit one random forest on a full record table and save the model");
    std::string t_records;
    std::string t_target = "WA";
    std::string t_with;
    std::string t_out;
    ctxrec::ForestParams t_params;
    int t_threads = 0;
    train->add_option("--records", t_records, "Input record table CSV")->required();
    train->add_option("--target", t_target, "Aspect to predict (WE, WA, or WO)");
    train->add_option("--with-aspects", t_with,
                      "Comma list of label aspects appended as one-hot inputs");
    train->add_option("--trees", t_params.trees, "Number of trees");
    train->add_option("--depth", t_params.max_depth, "Max tree depth (0 = unlimited)");
    train->add_option("--max-features", t_params.max_features,
                      "Candidate features per split (0 = ceil(sqrt(width)))");
    train->add_option("--seed", t_params.seed, "Master seed");
    train->add_option("--threads", t_threads, "Worker threads (0 = all cores)");
    train->add_option("--out", t_out, "Output model file")->required();
    train->callback([&] {
        Stopwatch watch;
        const ctxrec::AspectId target = ctxrec::require_aspect(t_target);
        Design d = load_design(t_records, target, parse_aspect_list(t_with));

        bool any_missing = false;
        for (const auto& record : d.dataset.records) {
            for (uint8_t bit : record.missing) {
                any_missing |= bit != 0;
            }
        }
        if (any_missing) {
            std::vector<size_t> all_rows(d.dataset.records.size());
            for (size_t i = 0; i < all_rows.size(); ++i) {
                all_rows[i] = i;
            }
            d.dataset = ctxrec::impute(d.dataset, ctxrec::fit_imputer(d.dataset, all_rows));
        }
        const ctxrec::Matrix x = ctxrec::design_matrix(d.dataset, d.inputs, d.vocabs);
        const ctxrec::RandomForest forest =
            ctxrec::train_forest(x, d.y, d.target_vocab, t_params, t_threads);
        const std::string model = ctxrec::serialize_forest(forest);
        spill(t_out, model);

        int max_depth = 0;
        for (const auto& tree : forest.trees) {
            max_depth = std::max(max_depth, tree.depth());
        }
        std::cout << "trained " << forest.trees.size() << " trees on "
                  << d.dataset.records.size() << " records (width " << x.cols
                  << "), deepest tree " << max_depth << "\n";
        std::cout << "wrote " << t_out << " (" << text_digest(model) << ")\n";

        ordered_json config{{"records", t_records},
                            {"target", ctxrec::to_string(target)},
                            {"with_aspects", joined_aspects(d.inputs)},
                            {"trees", t_params.trees},
                            {"depth", t_params.max_depth},
                            {"max_features", t_params.max_features},
                            {"seed", t_params.seed},
                            {"threads", t_threads},
                            {"dataset_digest", ctxrec::dataset_digest(d.dataset)}};
        write_manifest("train", config, t_out, model, watch.seconds());
    });

    // ---- experiment ------------------------------------------------------
    auto* experiment = app.add_subcommand(
        "experiment", "Run the cross-validated recognition protocol and write a report");
    std::string e_records;
    std::string e_target;
    std::string e_with;
    std::string e_protocol = "cv5";
    std::string e_grid;
    std::string e_out;
    ctxrec::ExperimentSpec e_spec;
    int e_threads = 0;
    experiment->add_option("--records", e_records, "Input record table CSV")->required();
    experiment->add_option("--target", e_target, "Aspect to predict (WE, WA, or WO)")
        ->required();
    experiment->add_option("--with-aspects", e_with,
                           "Comma list of label aspects appended as one-hot inputs");
    experiment->add_option("--protocol", e_protocol, "cv5 or nested");
    experiment->add_option("--trees", e_spec.forest.trees, "Trees per forest");
    experiment->add_option("--max-features", e_spec.forest.max_features,
                           "Candidate features per split (0 = ceil(sqrt(width)))");
    experiment->add_option("--depth-grid", e_grid,
                           "Comma list of depths to tune over (0 = unlimited)");
    experiment->add_option("--seed", e_spec.seed, "Master seed");
    experiment->add_option("--threads", e_threads, "Worker threads (0 = all cores)");
    experiment->add_option("--out", e_out, "Output report JSON")->required();
    experiment->callback([&] {
        Stopwatch watch;
        e_spec.target = ctxrec::require_aspect(e_target);
        e_spec.inputs = parse_aspect_list(e_with);
        e_spec.protocol = ctxrec::parse_protocol(e_protocol);
        if (!e_grid.empty()) {
            e_spec.depth_grid = parse_int_list(e_grid, "depth grid");
        }
        const ctxrec::Dataset dataset = ctxrec::read_table_file(e_records);
        const ctxrec::ExperimentReport report =
            ctxrec::run_experiment(dataset, e_spec, e_threads);
        const std::string text = ctxrec::serialize_report(report);
        spill(e_out, text);

        std::printf("micro-F1 %.4f  user-mean %.4f  depth", report.micro, report.user_mean);
        for (int depth : report.depths) {
            std::printf(" %d", depth);
        }
        std::printf("  (%.1fs)\n", report.runtime_seconds);
        std::cout << "wrote " << e_out << " (" << text_digest(text) << ")\n";

        ordered_json config{{"records", e_records},
                            {"target", ctxrec::to_string(report.spec.target)},
                            {"with_aspects", joined_aspects(report.spec.inputs)},
                            {"protocol", ctxrec::to_string(report.spec.protocol)},
                            {"trees", report.spec.forest.trees},
                            {"max_features", report.spec.forest.max_features},
                            {"depth_grid", report.spec.depth_grid},
                            {"seed", report.spec.seed},
                            {"threads", e_threads},
                            {"dataset_digest", report.digest},
                            {"runtime_seconds", report.runtime_seconds}};
        write_manifest("experiment", config, e_out, text, watch.seconds());
    });

    // ---- report ------------------------------------------------------
    auto* report_cmd = app.add_subcommand(
        "report", "Combine experiment reports into an improvement grid or plot data");
    std::vector<std::string> r_inputs;
    std::string r_format = "grid";
    std::string r_out;
    report_cmd->add_option("reports", r_inputs, "Experiment report JSON files")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--format", r_format, "grid, csv, or plotdata")
        ->check(CLI::IsMember({"grid", "csv", "plotdata"}));
    report_cmd->add_option("--out", r_out, "Output path (default: stdout)");
    report_cmd->callback([&] {
        Stopwatch watch;
        std::vector<ctxrec::ExperimentReport> reports;
        for (const std::string& path : r_inputs) {
            reports.push_back(ctxrec::load_report_file(path));
        }
        std::string text;
        if (r_format == "plotdata") {
            text = ctxrec::render_plotdata(reports);
        } else {
            const ctxrec::ImprovementTable table = ctxrec::improvement_table(reports);
            text = r_format == "grid" ? ctxrec::render_grid(table) : ctxrec::render_csv(table);
        }
        if (r_out.empty()) {
            std::cout << text;
        } else {
            spill(r_out, text);
            std::cout << "wrote " << r_out << " (" << text_digest(text) << ")\n";
            ordered_json config{{"reports", r_inputs}, {"format", r_format}};
            write_manifest("report", config, r_out, text, watch.seconds());
        }
    });

    // ---- graph ------------------------------------------------------
    auto* graph = app.add_subcommand(
        "graph", "Import an objective-context scene and query or re-export it");
    std::string gr_import;
    std::string gr_query;
    std::string gr_context;
    std::string gr_out;
    graph->add_option("--import", gr_import, "Scene file")->required();
    graph->add_option("--query", gr_query, "Print one entity and its relations");
    graph->add_option("--context", gr_context, "List entities of one aspect (TIME/WE/WA/WO/WI)");
    graph->add_option("--out", gr_out, "Re-export the scene in canonical form");
    graph->callback([&] {
        Stopwatch watch;
        const ctxrec::ContextGraph scene = ctxrec::ContextGraph::import_lines(slurp(gr_import));
        std::cout << "graph OK: " << scene.entity_count() << " entities, "
                  << scene.relation_count() << " relations\n";
        if (!gr_query.empty()) {
            const ctxrec::Entity* entity = scene.find(gr_query);
            if (entity == nullptr) {
                throw Error::data("graph: unknown entity '" + gr_query + "'");
            }
            std::cout << entity->id << " [" << entity->category
                      << (entity->aspect ? ", " + ctxrec::to_string(*entity->aspect) : "")
                      << "]\n";
            for (const auto& [key, value] : entity->attributes) {
                std::cout << "  " << key << " = " << value << "\n";
            }
            for (const auto& [src, label, dst] : scene.relations()) {
                if (src == gr_query || dst == gr_query) {
                    std::cout << "  " << src << " -" << label << "-> " << dst << "\n";
                }
            }
        }
        if (!gr_context.empty()) {
            const ctxrec::AspectId aspect = ctxrec::require_aspect(gr_context);
            for (const ctxrec::Entity& entity : scene.query_context(aspect)) {
                std::cout << entity.id << " [" << entity.category << "]\n";
            }
        }
        if (!gr_out.empty()) {
            const std::string text = scene.export_lines();
            spill(gr_out, text);
            std::cout << "wrote " << gr_out << " (" << text_digest(text) << ")\n";
            ordered_json config{{"import", gr_import}};
            write_manifest("graph", config, gr_out, text, watch.seconds());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help / --version
        }
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << ctxrec::to_string(e.category()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
