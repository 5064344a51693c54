package a;

/** Pairs two integers. */
class Beta {

    protected int x, y;

    int sum() {
        return x + y;
    }
}
