extern int fn1();
extern int fn2();
extern int fn3(int x, int y);

int main() {
    int i = 0, j = 0;
    int t = fn1();
    int x = fn3(i, j);
    int y = 0;

    while (t < 1000) {
        int s = fn2();
        if (s == 1) {
            y = y + x;
        } else {
            i = i + 1;
            j = j + 1;
        }

        assert(y != 0);

        x = fn3(i, j);
        t = fn1();
    }

    return 0;
}
