// CLI entry point. Subcommands grow as the pipeline stages land.
#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::printf("veil: no subcommands wired up yet\n");
    return 0;
}
