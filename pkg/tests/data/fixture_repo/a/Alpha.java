package a;

import java.util.List;
import java.util.ArrayList;

/** Counts widgets moving through the assembly line. */
public class Alpha {

    /** Number of widgets seen so far. */
    private int count;

    private static final String GREETING = "hello { not a brace }";

    public Alpha(int seed) {
        this.count = seed;
    }

    /**
     * Collects up to {@code limit} widget labels.
     */
    @Deprecated
    public List<String> collectLabels(int limit) {
        List<String> out = new ArrayList<>();
        for (int i = 0; i < limit && i < count; i++) {
            out.add("widget-" + i);
        }
        return out;
    }

    public enum Mode {
        FAST,
        CAREFUL
    }
}
