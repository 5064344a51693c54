package a.b;

import java.util.List;

/** Contract for delivering widgets somewhere else. */
public interface Gamma {

    /** Sends one batch of widget labels. */
    void deliver(List<String> batch);

    int capacity();
}
