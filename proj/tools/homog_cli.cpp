// homog: run homogenization studies from a flat key=value config and/or flags.
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "homog/cli.hpp"
#include "homog/error.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Random checkerboard homogenization workbench"};
    app.set_version_flag("--version", "homog 1.0");

    std::optional<std::string> command;
    std::optional<std::string> config_path;
    bool list_keys = false;
    app.add_option("command", command, "check-invariants | study-cell | study-convergence | study-dirichlet | "
                                       "suppressive-profile | max-moment");
    app.add_option("-c,--config", config_path, "flat key = value config file");
    app.add_flag("--keys", list_keys, "list every config key with its default and exit");

    std::map<std::string, std::optional<std::string>> flag_values;
    for (const auto& key : homog::config_keys()) {
        if (key.name == "command")
            continue;
        app.add_option("--" + key.name, flag_values[key.name], key.help + " [" + key.default_value + "]");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : homog::exit_code(homog::ErrorCategory::config);
    }

    if (list_keys) {
        for (const auto& key : homog::config_keys())
            std::cout << key.name << " = " << key.default_value << "    # " << key.help << '\n';
        return 0;
    }

    try {
        std::map<std::string, std::string> file;
        if (config_path)
            file = homog::read_config_file(*config_path);
        std::map<std::string, std::string> flags;
        if (command)
            flags["command"] = *command;
        for (const auto& [k, v] : flag_values)
            if (v)
                flags[k] = *v;
        std::vector<std::string> warnings;
        auto cfg = homog::parse_config(file, flags, &warnings);
        for (const auto& w : warnings)
            std::cerr << "warning: " << w << '\n';
        return homog::run(cfg, std::cout);
    } catch (const homog::Error& e) {
        std::cerr << "error [" << homog::category_name(e.category()) << "]: " << e.what() << '\n';
        return homog::exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << '\n';
        return homog::exit_code(homog::ErrorCategory::internal);
    }
}
