package demo;

import java.util.List;

public class Sizer {
    int count(List<String> items) {
        return items.size();
    }
}
