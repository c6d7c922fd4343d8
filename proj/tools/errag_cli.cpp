// errag - command line front end: ingest data, run chains, evaluate answers,
// build training files.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 chain parse error,
// 5 execution error, 6 template error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "errag/errag.hpp"
#include "errag/runtime.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitParse = 4;
constexpr int kExitExec = 5;
constexpr int kExitTemplate = 6;

std::string default_config(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ERRAG_CONFIG")) return env;
    return "catalog.json";
}

errag::Runtime load_runtime(const std::string& config_flag) {
    return errag::Runtime::from_config_file(default_config(config_flag));
}

int classify_error(const errag::Error& e) {
    switch (e.code()) {
        case errag::Errc::ConfigError:
        case errag::Errc::DuplicateSource:
            return kExitConfig;
        case errag::Errc::SyntaxError:
        case errag::Errc::ValidationError:
            return kExitParse;
        case errag::Errc::TemplateSyntax:
            return kExitTemplate;
        case errag::Errc::IoError:
            return kExitData;
        default:
            return kExitExec;
    }
}

int cmd_ingest(const std::string& config_flag) {
    errag::Runtime rt = load_runtime(config_flag);
    rt.persist_indexes();
    for (const auto& src : rt.report.sources) {
        std::cout << src.name << " (" << src.kind << ")";
        if (src.kind == "relational")
            std::cout << ": tables=" << src.tables << " rows=" << src.rows;
        else if (src.kind == "kg" || src.kind == "knowledge_graph")
            std::cout << ": pages=" << src.pages;
        else if (src.kind == "self")
            std::cout << ": ready";
        else
            std::cout << ": parents=" << src.parents << " children=" << src.children;
        std::cout << "\n";
    }
    return 0;
}

int cmd_run(const std::string& config_flag, std::string chain_text,
            const std::string& chain_file, const std::string& select,
            const std::string& query, const std::string& template_text, bool trace,
            bool compact_json) {
    if (!chain_file.empty()) chain_text = errag::read_file(chain_file);
    if (chain_text.empty()) {
        std::cerr << "error: no chain given (positional argument or --file)\n";
        return kExitParse;
    }

    errag::ApiChain chain;
    try {
        chain = errag::parse_chain(chain_text);
    } catch (const errag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }

    errag::Runtime rt = load_runtime(config_flag);

    if (!select.empty()) {
        std::string selection_query = query.empty() ? chain_text : query;
        if (select == "auto") {
            auto ranked = errag::heuristic_select(selection_query, rt.catalog);
            std::cerr << "selected source: " << ranked.front() << "\n";
        } else if (!rt.catalog.has_source(select)) {
            std::cerr << "error: unknown source '" << select << "'\n";
            return kExitExec;
        } else {
            std::cerr << "selected source: " << select << "\n";
        }
    }

    errag::ExecConfig exec_cfg;
    exec_cfg.query_context = query;
    if (trace) exec_cfg.trace = [](const std::string& line) { std::cerr << line << "\n"; };

    errag::EntitySet result;
    try {
        result = errag::execute(errag::ExecutionGraph::from_chain(chain), rt.catalog,
                                rt.adapters, *rt.gateway, exec_cfg);
    } catch (const errag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExec;
    }

    if (!template_text.empty()) {
        errag::ResultTemplate tpl;
        try {
            tpl = errag::parse_template(template_text);
        } catch (const errag::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitTemplate;
        }
        std::cout << errag::eval_template(tpl, result, rt.units) << "\n";
        return 0;
    }

    nlohmann::json arr = errag::entity_set_to_json(result);
    std::cout << (compact_json ? arr.dump() : arr.dump(2)) << "\n";
    return 0;
}

int cmd_eval(const std::string& config_flag, const std::string& eval_path, bool use_judge) {
    std::string text = errag::read_file(eval_path);
    std::unique_ptr<errag::Runtime> rt;
    if (use_judge) rt = std::make_unique<errag::Runtime>(load_runtime(config_flag));

    std::size_t count = 0;
    std::size_t correct = 0;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        std::string line =
            text.substr(start, end == std::string::npos ? std::string::npos : end - start);
        ++line_no;
        start = end == std::string::npos ? text.size() + 1 : end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("question") ||
            !j.contains("ground_truth"))
            throw errag::Error(errag::Errc::IoError,
                               "eval line " + std::to_string(line_no) + " is malformed");
        std::string question = j["question"].get<std::string>();
        std::string truth = j["ground_truth"].get<std::string>();
        std::string prediction = j.value("prediction", "");
        ++count;
        bool ok = use_judge ? errag::llm_judge(question, truth, prediction, *rt->gateway)
                            : errag::stem_accuracy(prediction, truth) == 1;
        if (ok) ++correct;
    }

    nlohmann::json out{{"count", count},
                       {"correct", correct},
                       {"accuracy", count == 0 ? 0.0 : double(correct) / double(count)},
                       {"metric", use_judge ? "llm_judge" : "stem_accuracy"}};
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_train_files(const std::string& log_path, const std::string& out_dir) {
    std::vector<errag::ExecutionLogEntry> log;
    try {
        log = errag::parse_log_jsonl(errag::read_file(log_path));
    } catch (const errag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }

    auto sft = errag::build_sft_set(log);
    auto pairs = errag::build_dpo_pairs(errag::tops_from_log(log), log);

    std::filesystem::create_directories(out_dir);
    std::filesystem::path dir(out_dir);
    errag::write_file((dir / "sft.jsonl").string(), errag::sft_set_to_jsonl(sft));
    errag::write_file((dir / "dpo_pairs.jsonl").string(), errag::dpo_pairs_to_jsonl(pairs));
    std::cout << "sft=" << sft.size() << " dpo_pairs=" << pairs.size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"errag - federated GET/JOIN retrieval over heterogeneous sources"};
    app.require_subcommand(1);

    std::string config_flag;
    app.add_option("--config", config_flag, "catalog config file (or ERRAG_CONFIG, default catalog.json)");

    auto* ingest = app.add_subcommand("ingest", "load sources, compute stats, persist indexes");

    auto* run = app.add_subcommand("run", "parse and execute a chain");
    std::string chain_text, chain_file, select, query, template_text, template_file;
    bool trace = false, compact = false;
    run->add_option("chain", chain_text, "chain text");
    run->add_option("--file", chain_file, "read the chain from a .erq file");
    run->add_option("--select", select, "auto or a source name (reported on stderr)");
    run->add_option("--query", query, "natural-language query for selection/extraction context");
    run->add_option("--template", template_text, "post-processing template");
    run->add_option("--template-file", template_file, "post-processing template file");
    run->add_flag("--trace", trace, "print the executor trace to stderr");
    run->add_flag("--json", compact, "compact JSON output");

    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string eval_path;
    bool use_judge = false;
    eval->add_option("file", eval_path, "JSON-lines eval set")->required();
    eval->add_flag("--judge", use_judge, "use the gateway judge instead of stem accuracy");

    auto* train = app.add_subcommand("train-files", "emit sft.jsonl and dpo_pairs.jsonl");
    std::string log_path, out_dir;
    train->add_option("log", log_path, "JSON-lines execution log")->required();
    train->add_option("out_dir", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(config_flag);
        if (app.got_subcommand(run)) {
            if (!template_file.empty()) template_text = errag::read_file(template_file);
            return cmd_run(config_flag, chain_text, chain_file, select, query, template_text,
                           trace, compact);
        }
        if (app.got_subcommand(eval)) return cmd_eval(config_flag, eval_path, use_judge);
        if (app.got_subcommand(train)) return cmd_train_files(log_path, out_dir);
    } catch (const errag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExec;
    }
    return 0;
}
