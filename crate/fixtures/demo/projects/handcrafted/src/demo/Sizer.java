package demo;

import java.util.List;

public class Sizer {
    int count(List<String> items) {
        int n = 0;
        for (String s : items) {
            n++;
        }
        return n;
    }
}
