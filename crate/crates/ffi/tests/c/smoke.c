#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "compcbf.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc((size_t)n + 1);
    size_t got = fread(buf, 1, (size_t)n, f);
    buf[got] = '\0';
    fclose(f);
    return buf;
}

#define CHECK(expr, want)                                                        \
    do {                                                                         \
        CompcbfStatus st_ = (expr);                                              \
        if (st_ != (want)) {                                                     \
            const char *m_ = compcbf_last_error();                               \
            fprintf(stderr, "%s: status %d (%s)\n", #expr, (int)st_, m_ ? m_ : ""); \
            return 1;                                                            \
        }                                                                        \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 3) return 2;
    char *aut_json = slurp(argv[1]);
    char *cert_json = slurp(argv[2]);
    if (!aut_json || !cert_json) return 2;

    CompcbfAutomaton *aut = NULL;
    CompcbfNetwork *net = NULL;
    CompcbfCertificate *cert = NULL;
    char *decomp = NULL;

    CHECK(compcbf_automaton_from_json(aut_json, &aut), COMPCBF_STATUS_OK);
    CHECK(compcbf_network_rooms(100, &net), COMPCBF_STATUS_OK);
    CHECK(compcbf_decompose_json(aut, net, &decomp), COMPCBF_STATUS_OK);
    if (strstr(decomp, "\"required\"") == NULL) return 1;
    CHECK(compcbf_certificate_from_json(cert_json, &cert), COMPCBF_STATUS_OK);
    CHECK(compcbf_check_small_gain(cert, net, 0.0), COMPCBF_STATUS_OK);

    double x = 21.5, b = 0.0;
    CHECK(compcbf_certificate_eval(cert, &x, 1, &b), COMPCBF_STATUS_OK);
    CHECK(compcbf_automaton_from_json(NULL, &aut), COMPCBF_STATUS_NULL_POINTER);

    printf("compcbf %s: N=%zu B(21.5)=%.6f\n", compcbf_version(), compcbf_network_size(net), b);

    compcbf_string_free(decomp);
    compcbf_certificate_free(cert);
    compcbf_network_free(net);
    compcbf_automaton_free(aut);
    free(aut_json);
    free(cert_json);
    return 0;
}
