/* Walks the C API end to end: build a shape, count and sample its standard
 * fillings, solve for a limit surface, and check the error path. */

#include <stdio.h>
#include <string.h>

#include "bead_atlas.h"

static int fail(const char *what) {
    fprintf(stderr, "%s: %s\n", what, ba_last_error_message());
    return 1;
}

int main(void) {
    printf("library %s\n", ba_version());

    /* Staircase (3, 2, 1): 16 standard fillings. */
    const uint64_t rows[] = {3, 2, 1};
    BaShape *shape = NULL;
    if (ba_shape_from_partitions(rows, 3, NULL, 0, 1, &shape) != BA_STATUS_OK)
        return fail("shape");
    printf("threads: %zu boxes: %zu\n", ba_shape_n_threads(shape),
           ba_shape_n_boxes(shape));

    char *count = NULL;
    if (ba_count_fillings(shape, &count) != BA_STATUS_OK)
        return fail("count");
    printf("fillings: %s\n", count);
    ba_string_free(count);

    double logn = 0.0;
    if (ba_count_fillings_log(shape, &logn) != BA_STATUS_OK)
        return fail("log count");
    printf("log fillings: %.4f\n", logn);

    BaSampler *sampler = NULL;
    if (ba_sampler_new(shape, 7, &sampler) != BA_STATUS_OK)
        return fail("sampler");
    BaTableau *t = NULL;
    if (ba_sampler_next_tableau(sampler, &t) != BA_STATUS_OK)
        return fail("draw");
    size_t nt = ba_tableau_n_threads(t);
    printf("tableau threads: %zu\n", nt);
    for (size_t i = 0; i < nt; i++) {
        uint32_t buf[16];
        size_t len = ba_tableau_thread_len(t, i);
        if (len > 16)
            return 1;
        if (ba_tableau_entries(t, i, buf, 16) != BA_STATUS_OK)
            return fail("entries");
        printf("thread %zu:", i);
        for (size_t k = 0; k < len; k++)
            printf(" %u", buf[k]);
        printf("\n");
    }
    ba_tableau_free(t);

    BaBeads *beads = NULL;
    if (ba_sampler_next_beads(sampler, &beads) != BA_STATUS_OK)
        return fail("beads");
    printf("bead threads: %zu\n", ba_beads_n_threads(beads));
    ba_beads_free(beads);
    ba_sampler_free(sampler);
    ba_shape_free(shape);

    /* Square diagram: limit surface on a small grid. */
    const uint64_t square[] = {2, 2};
    BaShape *sq = NULL;
    if (ba_shape_from_partitions(square, 2, NULL, 0, 1, &sq) != BA_STATUS_OK)
        return fail("square shape");
    BaSolution *sol = NULL;
    if (ba_solve_limit_shape(sq, 16, 16, 0, 0.0, &sol) != BA_STATUS_OK)
        return fail("solve");
    printf("converged: %s\n", ba_solution_converged(sol) ? "yes" : "no");
    printf("objective: %.4f\n", ba_solution_objective(sol));
    printf("center height: %.4f (closed form %.4f)\n",
           ba_solution_eval(sol, 0.5, 0.5), ba_square_height(0.5, 0.5));
    ba_solution_free(sol);
    ba_shape_free(sq);

    double f = 0.0;
    if (ba_free_energy(1.0, 0.3, &f) != BA_STATUS_OK)
        return fail("free energy");
    printf("free energy: %.6f\n", f);

    /* Error paths return a status and leave a readable message. */
    const uint64_t bad[] = {1, 2};
    BaShape *none = NULL;
    if (ba_shape_from_partitions(bad, 2, NULL, 0, 1, &none) != BA_STATUS_INVALID_SHAPE)
        return 1;
    if (strlen(ba_last_error_message()) == 0)
        return 1;
    printf("rejected bad shape: %s\n", ba_last_error_message());

    printf("demo ok\n");
    return 0;
}
