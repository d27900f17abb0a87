package demo;

import java.util.ArrayList;
import java.util.List;

public class EventLog {
    private final List<String> events = new ArrayList<>();

    void record(String event) {
        synchronized (events) {
            events.add(event);
        }
    }
}
