#include "ueval/config.hpp"
#include "ueval/error.hpp"
#include "ueval/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// Exit codes: 0 ok, 1 unexpected, then one per error category.
constexpr int kExitConfig = 2;
constexpr int kExitSchema = 3;
constexpr int kExitProtocol = 4;
constexpr int kExitTransport = 5;
constexpr int kExitContract = 6;

int run(int argc, char** argv) {
    CLI::App app{"unlearn-eval: evaluation harness for diffusion-model concept unlearning"};
    app.require_subcommand(1);

    std::string target;
    std::string config_path;
    std::string plan_out;
    std::string plan_in;
    std::string role_name = "base";
    std::string report_dir;

    auto* plan_cmd = app.add_subcommand("plan", "build an eval plan for a target concept");
    plan_cmd->add_option("--target", target, "target concept")->required();
    plan_cmd->add_option("--config", config_path, "run config JSON")->required();
    plan_cmd->add_option("--out", plan_out, "plan output path (default: <out_dir>/plan.json)");

    auto* gen_cmd = app.add_subcommand("generate", "generate images for one model role");
    gen_cmd->add_option("--plan", plan_in, "plan file (default: <out_dir>/plan.json)");
    gen_cmd->add_option("--role", role_name, "base | unlearned")->required();
    gen_cmd->add_option("--config", config_path, "run config JSON")->required();

    auto* score_cmd = app.add_subcommand("score", "embed and classify every generated image");
    score_cmd->add_option("--config", config_path, "run config JSON")->required();

    auto* report_cmd = app.add_subcommand("report", "assemble the evaluation report and CSVs");
    report_cmd->add_option("--config", config_path, "run config JSON")->required();
    report_cmd->add_option("--out", report_dir, "report directory (default: <out_dir>)");

    auto* run_cmd = app.add_subcommand("run", "full pipeline: plan, generate, score, report");
    run_cmd->add_option("--target", target, "target concept")->required();
    run_cmd->add_option("--config", config_path, "run config JSON")->required();

    CLI11_PARSE(app, argc, argv);

    ueval::RunConfig cfg = ueval::RunConfig::load(config_path);
    ueval::Pipeline pipeline(std::move(cfg));
    pipeline.set_log(&std::cout);

    if (plan_cmd->parsed()) {
        const auto out = plan_out.empty() ? pipeline.plan_path()
                                          : std::filesystem::path(plan_out);
        pipeline.cmd_plan(target, out);
    } else if (gen_cmd->parsed()) {
        const auto plan = plan_in.empty() ? pipeline.plan_path()
                                          : std::filesystem::path(plan_in);
        pipeline.cmd_generate(plan, ueval::role_from_string(role_name));
    } else if (score_cmd->parsed()) {
        pipeline.cmd_score();
    } else if (report_cmd->parsed()) {
        const auto dir = report_dir.empty() ? pipeline.config().out_dir
                                            : std::filesystem::path(report_dir);
        pipeline.cmd_report(dir);
    } else if (run_cmd->parsed()) {
        pipeline.cmd_run(target);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ueval::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ueval::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const ueval::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        for (const auto& reply : e.transcript()) {
            std::cerr << "  model reply: " << reply << "\n";
        }
        return kExitProtocol;
    } catch (const ueval::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const ueval::ContractError& e) {
        std::cerr << "contract error: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
