extern int nd();

int main() {
    int p1 = nd();
    int lk1;
    int p2 = nd();
    int lk2;
    int p3 = nd();
    int lk3;
    int p4 = nd();
    int lk4;
    int p5 = nd();
    int lk5;
    int cond;

    while (1) {
        cond = nd();
        if (cond == 0) {
            break;
        }
        lk1 = 0;
        lk2 = 0;
        lk3 = 0;
        lk4 = 0;
        lk5 = 0;

        if (p1 != 0) {
            lk1 = 1;
        }
        if (p2 != 0) {
            lk2 = 1;
        }
        if (p3 != 0) {
            lk3 = 1;
        }
        if (p4 != 0) {
            lk3 = 1;
        }
        if (p5 != 0) {
            lk5 = 1;
        }

        if (p1 != 0) {
            assert(lk1 == 1);
            lk1 = 0;
        }
        if (p2 != 0) {
            assert(lk2 == 1);
            lk2 = 0;
        }
        if (p3 != 0) {
            assert(lk3 == 1);
            lk3 = 0;
        }
        if (p4 != 0) {
            assert(lk4 == 1);
            lk4 = 0;
        }
        if (p5 != 0) {
            assert(lk5 == 1);
            lk5 = 0;
        }
    }
    return 0;
}
