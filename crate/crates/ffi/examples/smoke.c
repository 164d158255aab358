#include <math.h>
#include <stdio.h>
#include "sgu.h"

int main(void) {
    double p = 0.0;
    if (sgu_persistence_probability(1.0, log(3.0), 0.0, &p) != SGU_STATUS_OK || fabs(p - 0.5) > 1e-12) {
        return 1;
    }
    SguGraph *g = NULL;
    if (sgu_graph_from_json("{\"rooms\": [", &g) != SGU_STATUS_PARSE_ERROR || g != NULL) {
        return 2;
    }
    if (sgu_last_error_message()[0] == '\0') {
        return 3;
    }
    const char *empty = "{\"rooms\":[],\"objects\":[],\"belongs_to\":{},\"access\":[],\"epoch\":0.0}";
    if (sgu_graph_from_json(empty, &g) != SGU_STATUS_OK) {
        return 4;
    }
    char *json = NULL;
    if (sgu_graph_to_json(g, &json) != SGU_STATUS_OK) {
        return 5;
    }
    printf("%s", json);
    sgu_string_free(json);
    sgu_graph_free(g);
    return 0;
}
