package demo;

import java.util.Iterator;
import java.util.List;

public class ItemCounter {
    int count(List<String> items) {
        int n = 0;
        Iterator<String> it = items.iterator();
        while (it.hasNext()) {
            it.next();
            n++;
        }
        return n;
    }
}
